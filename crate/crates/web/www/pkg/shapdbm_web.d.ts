/* tslint:disable */
/* eslint-disable */

export class MapView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly accuracy: number;
    /**
     * RGBA bytes, row-major, ready for `ImageData`.
     */
    readonly rgba: Uint8Array;
    readonly width: number;
}

export class ShapleyView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly base: number;
    readonly estimate: Float64Array;
    readonly exact: Float64Array;
    readonly output: number;
}

export function decision_map(kind: string, shapley_space: boolean, seed: number, resolution: number): MapView;

export function shapley_comparison(seed: number, permutations: number): ShapleyView;

export function tsne_blobs(perplexity: number, seed: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_mapview_free: (a: number, b: number) => void;
    readonly __wbg_shapleyview_free: (a: number, b: number) => void;
    readonly decision_map: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly mapview_accuracy: (a: number) => number;
    readonly mapview_rgba: (a: number) => [number, number];
    readonly mapview_width: (a: number) => number;
    readonly shapley_comparison: (a: number, b: number) => [number, number, number];
    readonly shapleyview_estimate: (a: number) => [number, number];
    readonly shapleyview_exact: (a: number) => [number, number];
    readonly shapleyview_output: (a: number) => number;
    readonly tsne_blobs: (a: number, b: number) => [number, number, number, number];
    readonly shapleyview_base: (a: number) => number;
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
