/**
 * Figure builders: each kind maps run artifacts to an echarts option plus
 * the annotation values the tests check.  Styles are fixed and options
 * carry no timestamps, so a given input directory always renders the same
 * image.
 */

import { join } from "path";
import { existsSync } from "fs";
import { loglogSlope, powerLawThrough } from "./fit";
import {
  CurveTable,
  LevelRecord,
  SchemaError,
  Summary,
  readIdosCsv,
  readLevels,
  readSlmcCsv,
  readSummary,
  readUnperturbedCsv,
} from "./schemas";

export const FIGURE_KINDS = ["idos", "var", "conv", "dos"] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureJob {
  kind: FigureKind;
  inputDir: string;
  outPath: string;
  window?: [number, number];
}

export interface BuiltFigure {
  option: Record<string, unknown>;
  /** values printed on the figure, exposed for the contract tests */
  annotations: Record<string, number>;
}

interface Inputs {
  idos: CurveTable;
  unperturbed: CurveTable | null;
  slmc: CurveTable | null;
  levels: LevelRecord[];
  summary: Summary;
}

export function loadInputs(dir: string): Inputs {
  const slmcPath = join(dir, "slmc.csv");
  const unpPath = join(dir, "unperturbed.csv");
  return {
    idos: readIdosCsv(join(dir, "idos.csv")),
    unperturbed: existsSync(unpPath) ? readUnperturbedCsv(unpPath) : null,
    slmc: existsSync(slmcPath) ? readSlmcCsv(slmcPath) : null,
    levels: readLevels(join(dir, "levels.jsonl")),
    summary: readSummary(join(dir, "summary.json")),
  };
}

const BASE_STYLE = {
  animation: false,
  backgroundColor: "#ffffff",
  color: ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"],
  grid: { left: 70, right: 24, top: 56, bottom: 52 },
};

function windowed(table: CurveTable, window?: [number, number]): number[] {
  if (!window) return table.energy.map((_, i) => i);
  const [lo, hi] = window;
  const idx: number[] = [];
  for (let i = 0; i < table.energy.length; i++) {
    if (table.energy[i] >= lo && table.energy[i] <= hi) idx.push(i);
  }
  if (idx.length === 0) throw new Error(`energy window [${lo}, ${hi}] is empty`);
  return idx;
}

function lineSeries(name: string, x: number[], y: number[], extra: Record<string, unknown> = {}) {
  return {
    name,
    type: "line",
    showSymbol: false,
    data: x.map((v, i) => [v, y[i]]),
    ...extra,
  };
}

function axes(xName: string, yName: string, logY = false) {
  return {
    xAxis: { type: "value", name: xName, nameLocation: "middle", nameGap: 28 },
    yAxis: { type: logY ? "log" : "value", name: yName, nameGap: 20 },
  };
}

export function buildIdosFigure(inputs: Inputs, window?: [number, number]): BuiltFigure {
  const idx = windowed(inputs.idos, window);
  const x = idx.map((i) => inputs.idos.energy[i]);
  const series = [lineSeries("estimated IDoS", x, idx.map((i) => inputs.idos.columns.idos_mean[i]))];
  if (inputs.unperturbed) {
    const uidx = windowed(inputs.unperturbed, window);
    series.push(
      lineSeries(
        "unperturbed",
        uidx.map((i) => inputs.unperturbed!.energy[i]),
        uidx.map((i) => inputs.unperturbed!.columns.idos[i]),
        { lineStyle: { type: "dashed" } },
      ),
    );
  }
  return {
    option: {
      ...BASE_STYLE,
      title: { text: "Integrated density of states per unit area" },
      legend: { top: 28, data: series.map((s) => s.name) },
      ...axes("energy (eV)", "IDoS"),
      series,
    },
    annotations: {},
  };
}

export function buildVarFigure(inputs: Inputs, window?: [number, number]): BuiltFigure {
  if (!inputs.slmc) {
    throw new SchemaError("slmc.csv", null, "variance figure needs the single-level reference");
  }
  const comp = inputs.summary.slmc_comparison;
  if (!comp) {
    throw new SchemaError("summary.json", null, "summary carries no slmc_comparison block");
  }
  const idx = windowed(inputs.idos, window);
  const x = idx.map((i) => inputs.idos.energy[i]);
  const mlmcVar = idx.map((i) => inputs.idos.columns.idos_variance[i]);
  const sidx = windowed(inputs.slmc, window);
  const slmcVar = sidx.map((i) => inputs.slmc!.columns.idos_variance[i]);
  const factor = comp.rescale_factor;
  const floor = 1e-30; // log axis cannot carry exact zeros
  const series = [
    lineSeries("multilevel estimator", x, mlmcVar.map((v) => Math.max(v, floor))),
    lineSeries("single level", x, slmcVar.map((v) => Math.max(v, floor)), {
      lineStyle: { type: "dashed" },
    }),
    lineSeries(`single level x ${factor.toPrecision(3)}`, x, slmcVar.map((v) => Math.max(v * factor, floor)), {
      lineStyle: { type: "dotted" },
    }),
  ];
  return {
    option: {
      ...BASE_STYLE,
      title: { text: "Pointwise estimator variance" },
      legend: { top: 28, data: series.map((s) => s.name) },
      ...axes("energy (eV)", "variance", true),
      series,
    },
    annotations: { rescale_factor: factor },
  };
}

export function buildConvFigure(inputs: Inputs): BuiltFigure {
  const rows = inputs.levels.filter(
    (r) => r.variance_q !== undefined && r.variance_diff !== undefined,
  );
  if (rows.length < 2) {
    throw new SchemaError(
      "levels.jsonl",
      null,
      "rate figure needs per-level variance_q/variance_diff records (rates mode)",
    );
  }
  const ns = rows.map((r) => r.n);
  const vq = rows.map((r) => r.variance_q!);
  const vd = rows.map((r) => r.variance_diff!);
  const slopeS = loglogSlope(ns, vq);
  const slopeD = loglogSlope(ns, vd);
  const series: Record<string, unknown>[] = [
    lineSeries(`sample variance (slope ${slopeS.toFixed(2)})`, ns, vq, {
      showSymbol: true,
      symbolSize: 8,
    }),
    lineSeries(`cv-difference variance (slope ${slopeD.toFixed(2)})`, ns, vd, {
      showSymbol: true,
      symbolSize: 8,
    }),
    lineSeries("variance fit", ns, powerLawThrough(ns, vq, slopeS), {
      lineStyle: { type: "dashed", width: 1 },
    }),
    lineSeries("cv fit", ns, powerLawThrough(ns, vd, slopeD), {
      lineStyle: { type: "dashed", width: 1 },
    }),
  ];
  const annotations: Record<string, number> = { S: -slopeS, D: -slopeD };
  const haveCost = rows.every((r) => r.seconds_per_sample !== undefined);
  if (haveCost) {
    const cost = rows.map((r) => r.seconds_per_sample!);
    const slopeC = loglogSlope(ns, cost);
    annotations.C = slopeC;
    series.push(
      lineSeries(`seconds per sample (slope ${slopeC.toFixed(2)})`, ns, cost, {
        showSymbol: true,
        symbolSize: 8,
        yAxisIndex: 0,
      }),
    );
  }
  return {
    option: {
      ...BASE_STYLE,
      title: {
        text: "Decay of level statistics with supercell size",
        subtext: Object.entries(annotations)
          .map(([k, v]) => `${k} = ${v.toFixed(2)}`)
          .join(",  "),
      },
      legend: { top: 40, data: series.map((s) => (s as { name: string }).name) },
      xAxis: { type: "log", name: "supercell factor n", nameLocation: "middle", nameGap: 28 },
      yAxis: { type: "log", name: "window-averaged value", nameGap: 20 },
      series,
    },
    annotations,
  };
}

export function buildDosFigure(inputs: Inputs, window?: [number, number]): BuiltFigure {
  const idx = windowed(inputs.idos, window);
  const x = idx.map((i) => inputs.idos.energy[i]);
  const series = [lineSeries("estimated DoS", x, idx.map((i) => inputs.idos.columns.dos[i]))];
  if (inputs.unperturbed) {
    const uidx = windowed(inputs.unperturbed, window);
    series.push(
      lineSeries(
        "unperturbed",
        uidx.map((i) => inputs.unperturbed!.energy[i]),
        uidx.map((i) => inputs.unperturbed!.columns.dos[i]),
        { lineStyle: { type: "dashed" } },
      ),
    );
  }
  return {
    option: {
      ...BASE_STYLE,
      title: { text: "Density of states per unit area" },
      legend: { top: 28, data: series.map((s) => s.name) },
      ...axes("energy (eV)", "DoS (1/eV)"),
      series,
    },
    annotations: {},
  };
}

export function buildFigure(kind: FigureKind, inputs: Inputs, window?: [number, number]): BuiltFigure {
  switch (kind) {
    case "idos":
      return buildIdosFigure(inputs, window);
    case "var":
      return buildVarFigure(inputs, window);
    case "conv":
      return buildConvFigure(inputs);
    case "dos":
      return buildDosFigure(inputs, window);
    default: {
      const never: never = kind;
      throw new Error(`unknown figure kind ${never}`);
    }
  }
}
