/* tslint:disable */
/* eslint-disable */

/**
 * A simulation advanced a few operations at a time, for the zone map view.
 */
export class Explorer {
    free(): void;
    [Symbol.dispose](): void;
    constructor(scheme: string, zone_count: number, zone_kib: number, region_kib: number, vop_ratio: number, seed: number);
    snapshot(): string;
    /**
     * Runs `n` more operations and returns a snapshot.
     */
    step(n: number): string;
}

/**
 * Minimum OP ratio for a cache write rate, GC throughput and skew `k`.
 */
export function op_plan(t_cache: number, t_gc: number, k: number): string;

/**
 * Runs one experiment to completion and returns its interval series.
 */
export function simulate(scheme: string, zone_count: number, zone_kib: number, region_kib: number, vop_ratio: number, op_ratio: number, ops: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_explorer_free: (a: number, b: number) => void;
    readonly explorer_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly explorer_snapshot: (a: number) => [number, number];
    readonly explorer_step: (a: number, b: number) => [number, number, number, number];
    readonly op_plan: (a: number, b: number, c: number) => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
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
