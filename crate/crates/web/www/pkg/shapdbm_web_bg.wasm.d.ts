/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_mapview_free: (a: number, b: number) => void;
export const __wbg_shapleyview_free: (a: number, b: number) => void;
export const decision_map: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const mapview_accuracy: (a: number) => number;
export const mapview_rgba: (a: number) => [number, number];
export const mapview_width: (a: number) => number;
export const shapley_comparison: (a: number, b: number) => [number, number, number];
export const shapleyview_estimate: (a: number) => [number, number];
export const shapleyview_exact: (a: number) => [number, number];
export const shapleyview_output: (a: number) => number;
export const tsne_blobs: (a: number, b: number) => [number, number, number, number];
export const shapleyview_base: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
