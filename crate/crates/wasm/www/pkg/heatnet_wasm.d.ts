/* tslint:disable */
/* eslint-disable */

/**
 * Physical catalog diameters, the no-pipe entry at its minimal size.
 */
export function catalog_diameters(): Float64Array;

/**
 * `(d, C)` pairs of the penalized pipe cost in €/m.
 */
export function cost_curve(upsilon: number, omega: number, samples: number): Float64Array;

/**
 * Upper end of the diameter domain, m.
 */
export function diameter_upper_bound(): number;

/**
 * `(Re, f)` pairs of the Darcy friction factor implied by the pipe
 * conductance, Re log-spaced over `[10^lo, 10^hi]`.
 */
export function friction_curve(d: number, lo: number, hi: number, samples: number): Float64Array;

/**
 * `(d, d̄)` pairs of the extended projection at steepness `chi`.
 */
export function projection_curve(chi: number, samples: number): Float64Array;

export function simulate_grid(rows: number, cols: number, consumers: number, seed: bigint, diameter: number, inflow: number, balance: boolean): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly catalog_diameters: () => [number, number];
    readonly cost_curve: (a: number, b: number, c: number) => [number, number];
    readonly diameter_upper_bound: () => number;
    readonly friction_curve: (a: number, b: number, c: number, d: number) => [number, number];
    readonly projection_curve: (a: number, b: number) => [number, number];
    readonly simulate_grid: (a: number, b: number, c: number, d: bigint, e: number, f: number, g: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
