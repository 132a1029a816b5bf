export { MetricsError, MetricsRun, MetricsRow, readRun } from "./metrics.js";
export {
  convergenceSvg,
  innerCostSvg,
  plotConvergence,
  plotInnerCost,
  XAxis,
} from "./figures.js";
export { renderChart, linearScale, log10Scale } from "./svg.js";
