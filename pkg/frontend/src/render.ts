/** Server-side rendering: echarts option -> SVG -> PNG file via sharp. */

import { writeFileSync } from "fs";
import * as echarts from "echarts";
import sharp from "sharp";
import { BuiltFigure, FigureJob, buildFigure, loadInputs } from "./charts";

export const WIDTH = 880;
export const HEIGHT = 620;

export function renderSvg(figure: BuiltFigure): string {
  const chart = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width: WIDTH,
    height: HEIGHT,
  });
  try {
    chart.setOption(figure.option);
    return chart.renderToSVGString();
  } finally {
    chart.dispose();
  }
}

export async function render(job: FigureJob): Promise<BuiltFigure> {
  const inputs = loadInputs(job.inputDir);
  const figure = buildFigure(job.kind, inputs, job.window);
  const svg = renderSvg(figure);
  const png = await sharp(Buffer.from(svg)).png().toBuffer();
  writeFileSync(job.outPath, png);
  return figure;
}
