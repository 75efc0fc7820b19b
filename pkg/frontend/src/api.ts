// Typed client for the simulation service. Everything the console knows
// about the world arrives through these calls or the push socket; the
// view never invents state locally.

export interface DeviceSnapshot {
  channel_count: number
  rings: number
  live_phases: number[]
  ring_enable: boolean[]
  commit_counter: number
}

export interface ParticleState {
  position: [number, number, number]
  settled: boolean
  escaped: boolean
}

export interface NodeInfo {
  z: number
  stability: string
  potential: number
}

export interface PushEvent {
  commit_counter: number
  particle: ParticleState
  nodes: NodeInfo[]
}

export interface AxialProfile {
  z: number[]
  potential: number[]
  force_z: number[]
  weight: number
}

export interface ScriptStage {
  name: string
  expected_height: number
  lines: string[]
}

export interface PickingScript {
  config_hash: string
  channel_count: number
  rings: number
  target_height: number
  stages: ScriptStage[]
}

export interface CommandResult {
  ok: boolean
  commit_counter: number
  reply: Record<string, unknown> | null
}

export interface ServiceError {
  error: string // parse | range | protocol | planning | unknown session
  message?: string
  offset?: number
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: ServiceError) {
    super(detail.message ?? detail.error)
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method }
    if (body !== undefined) {
      init.headers = { 'content-type': 'application/json' }
      init.body = JSON.stringify(body)
    }
    const res = await this.fetchFn(this.baseUrl + path, init)
    const payload = await res.json()
    if (!res.ok) {
      const detail = (payload && payload.detail) ?? { error: 'unknown' }
      throw new ApiError(res.status, detail as ServiceError)
    }
    return payload as T
  }

  createSession(): Promise<{ session_id: string; channel_count: number; rings: number; config_hash: string }> {
    return this.request('POST', '/sessions')
  }

  deleteSession(sid: string): Promise<{ deleted: string }> {
    return this.request('DELETE', `/sessions/${sid}`)
  }

  command(sid: string, line: string): Promise<CommandResult> {
    return this.request('POST', `/sessions/${sid}/command`, { line })
  }

  device(sid: string): Promise<DeviceSnapshot> {
    return this.request('GET', `/sessions/${sid}/device`)
  }

  profile(sid: string, samples = 200): Promise<AxialProfile> {
    return this.request('GET', `/sessions/${sid}/profile?samples=${samples}`)
  }

  particle(sid: string): Promise<ParticleState> {
    return this.request('GET', `/sessions/${sid}/particle`)
  }

  nodes(sid: string): Promise<{ nodes: NodeInfo[] }> {
    return this.request('GET', `/sessions/${sid}/nodes`)
  }

  stepSettle(sid: string, steps = 25): Promise<PushEvent> {
    return this.request('POST', `/sessions/${sid}/step-settle`, { steps })
  }

  script(): Promise<PickingScript> {
    return this.request('GET', '/script')
  }

  eventsUrl(sid: string): string {
    return this.baseUrl.replace(/^http/, 'ws') + `/sessions/${sid}/events`
  }
}
