/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `"idw"` or `"kriging"` on the training picks; returns the score as JSON.
     */
    baseline(kind: string): string;
    /**
     * Last reconstructed bed, empty before any solve.
     */
    bed(): Float64Array;
    /**
     * 1 for pick cells, 2 for train core, 3 for test core, 0 elsewhere.
     */
    layout(): Uint8Array;
    /**
     * Square synthetic scene with `lines` flight lines across the flow.
     */
    constructor(size: number, seed: bigint, bias: number, lines: number);
    prior(): Float64Array;
    /**
     * Variational solve on the training picks; returns the score as JSON.
     */
    reconstruct(epochs: number, lambda_phys: number, lambda_prior: number): string;
    size(): number;
    truth(): Float64Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_baseline: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_bed: (a: number) => [number, number];
    readonly demo_layout: (a: number) => [number, number];
    readonly demo_new: (a: number, b: bigint, c: number, d: number) => [number, number, number];
    readonly demo_prior: (a: number) => [number, number];
    readonly demo_reconstruct: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_size: (a: number) => number;
    readonly demo_truth: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
