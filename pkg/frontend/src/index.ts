export * from "./base.js";
export * from "./elements.gen.js";
export * from "./sugar.js";
