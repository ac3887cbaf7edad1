/** Per-parameter slider model with optimistic updates.
 *
 * Edits apply locally first, then PATCH to the server; a rejection (422)
 * rolls the field back to its previous value and surfaces the server's
 * range hint.
 */

import { ParamSetDocument, RecipeDocument, identityParams } from "./ranges.js";

export type PatchFn = (patch: object) => Promise<void>;
export type RollbackListener = (path: string, message: string) => void;

type Region = "foreground" | "background";

function cloneParams(p: ParamSetDocument): ParamSetDocument {
  return {
    sharpness: p.sharpness,
    exposure: p.exposure,
    contrast: p.contrast,
    tone: [...p.tone],
    color: { r: [...p.color.r], g: [...p.color.g], b: [...p.color.b] },
  };
}

export class ParamsPanel {
  private document: RecipeDocument;
  onRollback: RollbackListener | null = null;

  constructor(private readonly patchServer: PatchFn, initial?: RecipeDocument) {
    this.document = initial ?? {
      version: 1,
      curve_resolution: 8,
      pipeline_order: ["sharpen", "exposure", "contrast", "tone", "color"],
      mode: "increase",
      foreground: identityParams(),
      background: identityParams(),
      provenance: { seed: null, iterations: null, tool_version: "" },
    };
  }

  load(document: RecipeDocument): void {
    this.document = document;
  }

  current(): RecipeDocument {
    return {
      ...this.document,
      foreground: cloneParams(this.document.foreground),
      background: cloneParams(this.document.background),
    };
  }

  scalar(region: Region, field: "sharpness" | "exposure" | "contrast"): number {
    return this.document[region][field];
  }

  toneValue(region: Region, index: number): number {
    return this.document[region].tone[index];
  }

  /** Optimistically set a scalar; resolves true if the server accepted it. */
  async setScalar(
    region: Region,
    field: "sharpness" | "exposure" | "contrast",
    value: number,
  ): Promise<boolean> {
    const previous = this.document[region][field];
    this.document[region][field] = value;
    try {
      await this.patchServer({ [region]: { [field]: value } });
      return true;
    } catch (error) {
      this.document[region][field] = previous;
      this.onRollback?.(`${region}.${field}`, String(error));
      return false;
    }
  }

  /** Optimistically replace one tone-curve point (the whole array is sent). */
  async setTonePoint(region: Region, index: number, value: number): Promise<boolean> {
    const previous = [...this.document[region].tone];
    this.document[region].tone[index] = value;
    try {
      await this.patchServer({ [region]: { tone: [...this.document[region].tone] } });
      return true;
    } catch (error) {
      this.document[region].tone = previous;
      this.onRollback?.(`${region}.tone[${index}]`, String(error));
      return false;
    }
  }
}
