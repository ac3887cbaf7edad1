/** Editor state shared by the DOM layer. */

export type ViewMode = "edited" | "original" | "saliency-overlay";
export type JobStatus = "idle" | "running" | "done" | "failed";

export interface EditorState {
  sessionId: string | null;
  alpha: number;
  view: ViewMode;
  job: JobStatus;
  jobMessage: string;
}

export function initialState(): EditorState {
  return { sessionId: null, alpha: 1.0, view: "edited", job: "idle", jobMessage: "" };
}

/** Poll the job status until it leaves "running". */
export async function pollJob(
  fetchStatus: () => Promise<{ job: string; message: string }>,
  onUpdate: (job: JobStatus, message: string) => void,
  intervalMs = 500,
  sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
): Promise<JobStatus> {
  for (;;) {
    const { job, message } = await fetchStatus();
    onUpdate(job as JobStatus, message);
    if (job !== "running") return job as JobStatus;
    await sleep(intervalMs);
  }
}
