/* tslint:disable */
/* eslint-disable */

/**
 * Fast-reaction agents on a line with strategies `{−1, +1}` under the
 * origin-repulsion payoff.
 */
export function fast_reaction(agents: number, eps: number, steps: number, seed: bigint): string;

/**
 * Newtonian particles next to their fast-reaction embedding at entropy `eps`.
 */
export function newton_vs_game(agents: number, eps: number, seed: bigint): string;

/**
 * Entropic mixed strategy over `k` evenly spaced velocities in `[−1, 1]`
 * whose mean is `v`.
 */
export function reconstruct(v: number, eps: number, k: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly fast_reaction: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly newton_vs_game: (a: number, b: number, c: bigint) => [number, number, number, number];
    readonly reconstruct: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
