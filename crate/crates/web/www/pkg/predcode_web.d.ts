/* tslint:disable */
/* eslint-disable */

/**
 * Trains a simple CNN on a small random-Life dataset, one epoch per call.
 */
export class Lab {
    free(): void;
    [Symbol.dispose](): void;
    epochs(): number;
    heldout_mse(): number;
    kernel(): number;
    /**
     * `episodes` of 10 frames at 16×20; a tenth is held out.
     */
    constructor(kernel: number, episodes: number, seed: bigint);
    /**
     * The model's guess at the world's next generation as RGBA; cells that
     * disagree with the true rule are drawn red.
     */
    predict(world: World): Uint8Array;
    /**
     * How many of the 512 3×3 neighbourhoods the model maps correctly.
     */
    rule_matches(): number;
    /**
     * Mean training loss of the epoch just run.
     */
    train_epoch(): number;
}

export class World {
    free(): void;
    [Symbol.dispose](): void;
    alive(): number;
    clear(): void;
    generation(): number;
    height(): number;
    constructor(height: number, width: number);
    place(pattern: string, row: number, col: number): void;
    randomize(density: number, seed: bigint): void;
    rgba(): Uint8Array;
    set_toroidal(on: boolean): void;
    step(): void;
    toggle(row: number, col: number): void;
    width(): number;
}

/**
 * Previous-frame MSE of random-Life episodes for each starting density.
 */
export function baseline_curve(densities: Float64Array, height: number, width: number, episodes: number, seed: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_lab_free: (a: number, b: number) => void;
    readonly __wbg_world_free: (a: number, b: number) => void;
    readonly baseline_curve: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly lab_epochs: (a: number) => number;
    readonly lab_heldout_mse: (a: number) => [number, number, number];
    readonly lab_kernel: (a: number) => number;
    readonly lab_new: (a: number, b: number, c: bigint) => [number, number, number];
    readonly lab_predict: (a: number, b: number) => [number, number, number, number];
    readonly lab_rule_matches: (a: number) => [number, number, number];
    readonly lab_train_epoch: (a: number) => [number, number, number];
    readonly world_alive: (a: number) => number;
    readonly world_clear: (a: number) => void;
    readonly world_generation: (a: number) => number;
    readonly world_height: (a: number) => number;
    readonly world_new: (a: number, b: number) => number;
    readonly world_place: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly world_randomize: (a: number, b: number, c: bigint) => [number, number];
    readonly world_rgba: (a: number) => [number, number];
    readonly world_set_toroidal: (a: number, b: number) => void;
    readonly world_step: (a: number) => void;
    readonly world_toggle: (a: number, b: number, c: number) => void;
    readonly world_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
