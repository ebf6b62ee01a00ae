// Thin typed client over the pipeline service. All pipeline math lives
// behind these endpoints; the UI never derives or measures anything itself.

import type { Box, BoxDocument, DeriveResponse, HealthResponse, MaskResponse } from './types.js'

export class ApiError extends Error {
  readonly status: number
  constructor(status: number, message: string) {
    super(message)
    this.status = status
  }
}

async function parse<T>(resp: Response): Promise<T> {
  const body = await resp.json().catch(() => ({}))
  if (!resp.ok) {
    throw new ApiError(resp.status, (body as { error?: string }).error ?? resp.statusText)
  }
  return body as T
}

export class ApiClient {
  readonly base: string

  constructor(base = '') {
    this.base = base.replace(/\/$/, '')
  }

  health(): Promise<HealthResponse> {
    return fetch(`${this.base}/health`).then((r) => parse<HealthResponse>(r))
  }

  listRois(): Promise<string[]> {
    return fetch(`${this.base}/boxes`)
      .then((r) => parse<{ rois: string[] }>(r))
      .then((doc) => doc.rois)
  }

  getMask(roi: string): Promise<MaskResponse> {
    return fetch(`${this.base}/mask?roi=${encodeURIComponent(roi)}`).then((r) =>
      parse<MaskResponse>(r),
    )
  }

  getBoxes(roi: string): Promise<BoxDocument> {
    return fetch(`${this.base}/boxes?roi=${encodeURIComponent(roi)}`).then((r) =>
      parse<BoxDocument>(r),
    )
  }

  saveBoxes(roi: string, doc: BoxDocument): Promise<{ saved: number }> {
    return fetch(`${this.base}/boxes?roi=${encodeURIComponent(roi)}`, {
      method: 'PUT',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(doc),
    }).then((r) => parse<{ saved: number }>(r))
  }

  derive(roi: string, boxes: readonly Box[], signal?: AbortSignal): Promise<DeriveResponse> {
    return fetch(`${this.base}/derive`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ roi, boxes }),
      signal,
    }).then((r) => parse<DeriveResponse>(r))
  }
}
