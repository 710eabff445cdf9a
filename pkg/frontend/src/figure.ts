import * as echarts from "echarts";

import { Table, num } from "./csv.js";

/** What to plot: which columns give x, y, and the per-curve grouping. */
export interface FigureSpec {
  x: string;
  y: string;
  /** Grouping column; one curve per distinct value. */
  series: string;
  /** Optional standard-error column rendered as whiskers. */
  err?: string;
  logY?: boolean;
  title?: string;
  width?: number;
  height?: number;
}

/** Scenario codes from the simulator mapped to display names, in fixed
 * legend order. Unknown series values keep their raw name and follow. */
const SCENARIO_LABELS: [string, string][] = [
  ["TS-TS", "TS-TS"],
  ["TS-ES", "TS-ES"],
  ["ES-TS", "ES-TS"],
  ["ES-ES", "ES-ES"],
  ["CONV", "Conventional RIS"],
];

export interface Series {
  name: string;
  /** [x, y] pairs sorted by x; points with NaN y (all-infeasible
   * aggregates) are dropped. */
  points: [number, number][];
  /** [x, y - err, y + err] whisker triples, aligned with points. */
  whiskers: [number, number, number][];
}

export function displayName(raw: string): string {
  const hit = SCENARIO_LABELS.find(([code]) => code === raw);
  return hit ? hit[1] : raw;
}

/** Group table rows into one sorted series per distinct grouping value,
 * ordered by the fixed scenario legend order first, then first
 * appearance. */
export function buildSeries(table: Table, spec: FigureSpec): Series[] {
  const groups = new Map<string, Series>();
  const order: string[] = [];
  for (const row of table.rows) {
    const key = row[spec.series];
    if (!groups.has(key)) {
      groups.set(key, { name: displayName(key), points: [], whiskers: [] });
      order.push(key);
    }
    const y = num(row, spec.y);
    if (Number.isNaN(y)) continue;
    const x = num(row, spec.x);
    const g = groups.get(key)!;
    g.points.push([x, y]);
    if (spec.err) {
      const e = num(row, spec.err);
      g.whiskers.push([x, y - e, y + e]);
    }
  }
  const rank = (key: string) => {
    const i = SCENARIO_LABELS.findIndex(([code]) => code === key);
    return i >= 0 ? i : SCENARIO_LABELS.length + order.indexOf(key);
  };
  const keys = [...order].sort((a, b) => rank(a) - rank(b));
  return keys.map((k) => {
    const g = groups.get(k)!;
    const idx = g.points.map((_, i) => i)
      .sort((a, b) => g.points[a][0] - g.points[b][0]);
    return {
      name: g.name,
      points: idx.map((i) => g.points[i]),
      whiskers: spec.err ? idx.map((i) => g.whiskers[i]) : [],
    };
  });
}

function axisName(col: string): string {
  if (col === "mean_energy_J") return "Energy consumption (J)";
  if (col === "value") return "Swept value";
  if (col === "objective") return "Objective";
  if (col === "iteration") return "Iteration";
  return col;
}

/** Render the figure to an SVG string. Deterministic: no animation, no
 * time-dependent state. */
export function renderSvg(table: Table, spec: FigureSpec): string {
  const series = buildSeries(table, spec);
  const chart = echarts.init(null, undefined, {
    renderer: "svg",
    ssr: true,
    width: spec.width ?? 800,
    height: spec.height ?? 560,
  });
  const option: echarts.EChartsCoreOption = {
    animation: false,
    title: spec.title ? { text: spec.title, left: "center" } : undefined,
    legend: { data: series.map((s) => s.name), bottom: 0 },
    grid: { left: 70, right: 24, top: spec.title ? 48 : 24, bottom: 64 },
    xAxis: {
      type: "value",
      name: axisName(spec.x),
      nameLocation: "middle",
      nameGap: 28,
      scale: true,
    },
    yAxis: {
      type: spec.logY ? "log" : "value",
      name: axisName(spec.y),
      nameLocation: "middle",
      nameGap: 52,
      scale: true,
    },
    series: [
      ...series.map((s) => ({
        name: s.name,
        type: "line" as const,
        symbolSize: 7,
        data: s.points,
      })),
      ...series
        .filter((s) => s.whiskers.length > 0)
        .map((s) => ({
          name: s.name,
          type: "custom" as const,
          legendHoverLink: false,
          renderItem: whiskerRenderer,
          data: s.whiskers,
          z: 10,
        })),
    ],
  };
  chart.setOption(option);
  const svg = chart.renderToSVGString();
  chart.dispose();
  return normalizeClassNames(svg);
}

/** Rewrite the renderer's generated class names (which embed a
 * process-global instance counter) to sequential ids so the same input
 * always yields byte-identical SVG. */
function normalizeClassNames(svg: string): string {
  const ids = new Map<string, string>();
  // strip the instance counter from every generated id (clip paths,
  // class names), then renumber the style classes by first appearance
  svg = svg.replace(/zr\d+-/g, "zr-");
  return svg.replace(/zr-cls-\d+/g, (tok) => {
    let mapped = ids.get(tok);
    if (mapped === undefined) {
      mapped = `zr-cls-${ids.size}`;
      ids.set(tok, mapped);
    }
    return mapped;
  });
}

// standard-error whiskers: vertical bar with serifs at y-err and y+err
function whiskerRenderer(
  params: echarts.CustomSeriesRenderItemParams,
  api: echarts.CustomSeriesRenderItemAPI,
): echarts.CustomSeriesRenderItemReturn {
  const lo = api.coord([api.value(0), api.value(1)]);
  const hi = api.coord([api.value(0), api.value(2)]);
  const halfWidth = 4;
  const style = { stroke: api.visual("color") as string, fill: undefined };
  const bar = (x0: number, y0: number, x1: number, y1: number) => ({
    type: "line" as const,
    shape: { x1: x0, y1: y0, x2: x1, y2: y1 },
    style,
  });
  return {
    type: "group",
    children: [
      bar(lo[0], lo[1], hi[0], hi[1]),
      bar(lo[0] - halfWidth, lo[1], lo[0] + halfWidth, lo[1]),
      bar(hi[0] - halfWidth, hi[1], hi[0] + halfWidth, hi[1]),
    ],
  };
}
