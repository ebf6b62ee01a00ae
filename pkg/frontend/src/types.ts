export interface Box {
  x: number
  y: number
  w: number
  h: number
}

export interface BoxDocument {
  image: string
  boxes: Box[]
}

export interface MaskResponse {
  width: number
  height: number
  preview_width: number
  preview_height: number
  labels: number[]
  bits: number[]
}

export interface InstanceSummary {
  id: number
  box: Box
  area: number
}

export interface DeriveResponse {
  count: number
  instances: InstanceSummary[]
  preview: { width: number; height: number; ids: number[] }
}

export interface HealthResponse {
  status: string
  version: string
}
