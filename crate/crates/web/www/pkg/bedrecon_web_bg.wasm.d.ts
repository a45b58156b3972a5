/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_baseline: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_bed: (a: number) => [number, number];
export const demo_layout: (a: number) => [number, number];
export const demo_new: (a: number, b: bigint, c: number, d: number) => [number, number, number];
export const demo_prior: (a: number) => [number, number];
export const demo_reconstruct: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_size: (a: number) => number;
export const demo_truth: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
