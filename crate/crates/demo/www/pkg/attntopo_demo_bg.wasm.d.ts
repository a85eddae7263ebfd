/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_head_free: (a: number, b: number) => void;
export const head_attention: (a: number) => [number, number];
export const head_betti_curve: (a: number, b: number, c: number) => [number, number, number, number];
export const head_distances: (a: number) => [number, number];
export const head_features: (a: number, b: number) => [number, number, number, number];
export const head_n: (a: number) => number;
export const head_new: (a: number, b: number, c: number) => [number, number, number];
export const head_persistence: (a: number, b: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
