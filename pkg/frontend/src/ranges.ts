/** Parameter ranges mirrored from the server's validation. */

export const CURVE_RESOLUTION = 8;

export const SCALAR_RANGES = {
  sharpness: [-2, 2],
  exposure: [-3, 3],
  contrast: [-1, 1],
} as const;

export const CURVE_RANGE = [0.01, 3] as const;
export const ALPHA_RANGE = [0, 1.5] as const;

export interface ParamSetDocument {
  sharpness: number;
  exposure: number;
  contrast: number;
  tone: number[];
  color: { r: number[]; g: number[]; b: number[] };
}

export interface RecipeDocument {
  version: number;
  curve_resolution: number;
  pipeline_order: string[];
  mode: string;
  foreground: ParamSetDocument;
  background: ParamSetDocument;
  provenance: { seed: number | null; iterations: number | null; tool_version: string };
}

export function identityParams(): ParamSetDocument {
  const flat = () => new Array(CURVE_RESOLUTION).fill(1);
  return {
    sharpness: 0,
    exposure: 0,
    contrast: 0,
    tone: flat(),
    color: { r: flat(), g: flat(), b: flat() },
  };
}

export function clampScalar(name: keyof typeof SCALAR_RANGES, value: number): number {
  const [lo, hi] = SCALAR_RANGES[name];
  return Math.min(Math.max(value, lo), hi);
}
