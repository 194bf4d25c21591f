/** Least-squares slope of log(y) against log(x). */
export function loglogSlope(xs: number[], ys: number[]): number {
  if (xs.length !== ys.length || xs.length < 2) {
    throw new Error(`need at least two points, got ${xs.length}/${ys.length}`);
  }
  for (const y of ys) {
    if (!(y > 0)) throw new Error(`log-log fit needs positive values, got ${y}`);
  }
  const lx = xs.map(Math.log);
  const ly = ys.map(Math.log);
  const mx = lx.reduce((a, b) => a + b, 0) / lx.length;
  const my = ly.reduce((a, b) => a + b, 0) / ly.length;
  let num = 0;
  let den = 0;
  for (let i = 0; i < lx.length; i++) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return num / den;
}

/** Evaluate the fitted power law c * x^slope at the given points. */
export function powerLawThrough(xs: number[], ys: number[], slope: number): number[] {
  const lx = xs.map(Math.log);
  const ly = ys.map(Math.log);
  const mx = lx.reduce((a, b) => a + b, 0) / lx.length;
  const my = ly.reduce((a, b) => a + b, 0) / ly.length;
  const logc = my - slope * mx;
  return xs.map((x) => Math.exp(logc + slope * Math.log(x)));
}
