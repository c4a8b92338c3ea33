/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const catalog_diameters: () => [number, number];
export const cost_curve: (a: number, b: number, c: number) => [number, number];
export const diameter_upper_bound: () => number;
export const friction_curve: (a: number, b: number, c: number, d: number) => [number, number];
export const projection_curve: (a: number, b: number) => [number, number];
export const simulate_grid: (a: number, b: number, c: number, d: bigint, e: number, f: number, g: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
