/* tslint:disable */
/* eslint-disable */

/**
 * Heat model, its admissibility analysis and the three stability LMIs.
 */
export function heat_analysis(dx: number, dt: number, rounded: boolean): string;

/**
 * First state on an `n x n` grid with unit boundary values, as rows over `j`.
 * An empty `gain` simulates the open loop.
 */
export function simulate_heat(dx: number, dt: number, rounded: boolean, mode: string, gain: string, n: number): string;

/**
 * Closed-loop check of a gain given as comma-separated row-major entries.
 */
export function verify_heat_gain(dx: number, dt: number, rounded: boolean, mode: string, gain: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly heat_analysis: (a: number, b: number, c: number) => [number, number];
    readonly simulate_heat: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number];
    readonly verify_heat_gain: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
