/* tslint:disable */
/* eslint-disable */

/**
 * Planned altitude offsets of a toy drifting-down chunk policy, sampled
 * without and then with payload guidance. Returns `2 * h` values: row
 * altitudes relative to the start, unguided first.
 */
export function guided_altitudes(h: number, lambda_z: number, s0: number, holding: boolean, seed: number): Float64Array;

/**
 * `[c_intent, o_intent, c_meas, o_meas, o_flag, alpha]` for the recent
 * gripper commands and the measured aperture, with default thresholds.
 */
export function payload_scores(commands: Float64Array, aperture: number): Float64Array;

/**
 * Continuity weights over a chunk of `h` rows with a frozen prefix of `b`.
 */
export function soft_mask(h: number, b: number, decay_rate: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly guided_altitudes: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly payload_scores: (a: number, b: number, c: number) => [number, number];
    readonly soft_mask: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
