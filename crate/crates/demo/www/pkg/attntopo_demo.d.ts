/* tslint:disable */
/* eslint-disable */

/**
 * One synthetic attention head with its distance matrix and diagram.
 */
export class Head {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Row-major attention weights.
     */
    attention(): Float64Array;
    /**
     * Betti numbers of `dim` at `steps` evenly spaced values in `[0, 1]`.
     */
    betti_curve(dim: number, steps: number): Uint32Array;
    /**
     * Row-major distances `1 − max(w_ij, w_ji)`.
     */
    distances(): Float64Array;
    /**
     * `[entropy, bottleneck, wasserstein]` per dimension of the last diagram.
     */
    features(wasserstein_p: number): Float64Array;
    /**
     * Generates a head from `seed`; `locality` in `[0, 1]` pulls attention
     * towards neighbouring tokens.
     */
    constructor(seed: number, n_tokens: number, locality: number);
    /**
     * Computes the diagram and returns it flattened as `[dim, birth, death, ...]`.
     */
    persistence(max_hom_dim: number): Float64Array;
    readonly n: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_head_free: (a: number, b: number) => void;
    readonly head_attention: (a: number) => [number, number];
    readonly head_betti_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly head_distances: (a: number) => [number, number];
    readonly head_features: (a: number, b: number) => [number, number, number, number];
    readonly head_n: (a: number) => number;
    readonly head_new: (a: number, b: number, c: number) => [number, number, number];
    readonly head_persistence: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
