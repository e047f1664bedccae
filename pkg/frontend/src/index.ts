export { curveBands, fractionalRanks, meanAndSe, rankCurves } from "./aggregate.js";
export { render, renderCurves, renderLengthscales, renderRanks, renderTiming } from "./figures.js";
export { loadInputs, parseRunRecord, parseRunsCsv, SchemaError, SCHEMA_VERSION } from "./schema.js";
export { extractFigureData } from "./svg.js";
