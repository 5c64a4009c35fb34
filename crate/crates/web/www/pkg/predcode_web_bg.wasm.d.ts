/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_lab_free: (a: number, b: number) => void;
export const __wbg_world_free: (a: number, b: number) => void;
export const baseline_curve: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
export const lab_epochs: (a: number) => number;
export const lab_heldout_mse: (a: number) => [number, number, number];
export const lab_kernel: (a: number) => number;
export const lab_new: (a: number, b: number, c: bigint) => [number, number, number];
export const lab_predict: (a: number, b: number) => [number, number, number, number];
export const lab_rule_matches: (a: number) => [number, number, number];
export const lab_train_epoch: (a: number) => [number, number, number];
export const world_alive: (a: number) => number;
export const world_clear: (a: number) => void;
export const world_generation: (a: number) => number;
export const world_height: (a: number) => number;
export const world_new: (a: number, b: number) => number;
export const world_place: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const world_randomize: (a: number, b: number, c: bigint) => [number, number];
export const world_rgba: (a: number) => [number, number];
export const world_set_toroidal: (a: number, b: number) => void;
export const world_step: (a: number) => void;
export const world_toggle: (a: number, b: number, c: number) => void;
export const world_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
