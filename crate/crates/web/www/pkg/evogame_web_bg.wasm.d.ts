/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const fast_reaction: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const newton_vs_game: (a: number, b: number, c: bigint) => [number, number, number, number];
export const reconstruct: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
