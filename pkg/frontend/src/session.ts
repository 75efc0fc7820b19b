// Console view model. All mutation goes through wire-grammar commands
// sent to the service; the view state below is only ever refreshed from
// service responses and push events.

import {
  ApiError,
  AxialProfile,
  DeviceSnapshot,
  NodeInfo,
  ParticleState,
  PickingScript,
  PushEvent,
  ServiceClient,
} from './api.js'

export interface StageProgress {
  name: string
  expectedHeight: number // m
  done: boolean
}

export interface ViewState {
  sessionId: string
  device: DeviceSnapshot
  particle: ParticleState
  nodes: NodeInfo[]
  profile: AxialProfile | null
  heightTrace: { commit: number; z: number }[]
  stages: StageProgress[]
  lastError: string | null
}

// A stage counts as reached once the particle sits within 25% of the
// height that stage aims for (or anywhere above it).
const STAGE_TOLERANCE = 0.25

export const NUDGE_SMALL = 25
export const NUDGE_LARGE = 125
const SETTLE_STEPS = 25

export class ConsoleSession {
  readonly state: ViewState
  /** Every wire-grammar line sent, in order — replayable via `device repl`. */
  readonly commandLog: string[] = []
  onChange: (() => void) | null = null

  private constructor(
    private readonly client: ServiceClient,
    sessionId: string,
    device: DeviceSnapshot,
    particle: ParticleState,
  ) {
    this.state = {
      sessionId,
      device,
      particle,
      nodes: [],
      profile: null,
      heightTrace: [{ commit: device.commit_counter, z: particle.position[2] }],
      stages: [],
      lastError: null,
    }
  }

  static async open(client: ServiceClient): Promise<ConsoleSession> {
    const created = await client.createSession()
    const device = await client.device(created.session_id)
    const particle = await client.particle(created.session_id)
    return new ConsoleSession(client, created.session_id, device, particle)
  }

  get channelsPerRing(): number {
    return this.state.device.channel_count / this.state.device.rings
  }

  ringChannels(level: number): number[] {
    const per = this.channelsPerRing
    return Array.from({ length: per }, (_, j) => (level - 1) * per + j)
  }

  async loadScript(): Promise<PickingScript> {
    const script = await this.client.script()
    this.state.stages = script.stages.map((s) => ({
      name: s.name,
      expectedHeight: s.expected_height,
      done: false,
    }))
    this.script_ = script
    this.notify()
    return script
  }

  private script_: PickingScript | null = null

  /** Send one wire-grammar line; a COMMIT also settles and refreshes. */
  async dispatchLine(line: string): Promise<void> {
    const bare = line.split('#', 1)[0].trim()
    if (!bare) return
    try {
      const result = await this.client.command(this.state.sessionId, bare)
      this.commandLog.push(bare)
      this.state.lastError = null
      this.state.device = await this.client.device(this.state.sessionId)
      if (bare.toUpperCase() === 'COMMIT') {
        await this.settleAndRefresh()
      }
      void result
    } catch (err) {
      if (err instanceof ApiError) {
        this.state.lastError = err.detail.message ?? err.detail.error
        this.notify()
        return
      }
      throw err
    }
    this.notify()
  }

  async toggleRing(level: number): Promise<void> {
    const on = this.state.device.ring_enable[level - 1]
    await this.dispatchLine(`RING ${level} ${on ? 'OFF' : 'ON'}`)
    await this.dispatchLine('COMMIT')
  }

  /** Nudge every channel of one ring by +-steps, then commit. */
  async nudgeRing(level: number, steps: number): Promise<void> {
    const op = steps >= 0 ? 'INC' : 'DEC'
    const amount = Math.abs(steps)
    for (const ch of this.ringChannels(level)) {
      await this.dispatchLine(`${op} ${ch} ${amount}`)
    }
    await this.dispatchLine('COMMIT')
  }

  /** Replay the planner's command lines for one stage (0-based index). */
  async autoRunStage(index: number): Promise<void> {
    if (!this.script_) await this.loadScript()
    const stage = this.script_!.stages[index]
    if (!stage) throw new Error(`no stage ${index}`)
    for (const line of stage.lines) {
      await this.dispatchLine(line)
    }
  }

  async refreshProfile(): Promise<void> {
    this.state.profile = await this.client.profile(this.state.sessionId)
    this.notify()
  }

  /** Idempotent refresh from the live state (the QUERY-equivalent view). */
  async refresh(): Promise<void> {
    this.state.device = await this.client.device(this.state.sessionId)
    this.state.particle = await this.client.particle(this.state.sessionId)
    this.state.nodes = (await this.client.nodes(this.state.sessionId)).nodes
    this.notify()
  }

  applyEvent(event: PushEvent): void {
    // push events are monotone in commit counter; drop stale ones
    if (event.commit_counter < this.state.device.commit_counter) return
    this.state.particle = event.particle
    this.state.nodes = event.nodes
    this.recordHeight(event.commit_counter, event.particle.position[2])
    this.notify()
  }

  private async settleAndRefresh(): Promise<void> {
    const event = await this.client.stepSettle(this.state.sessionId, SETTLE_STEPS)
    this.applyEvent(event)
  }

  private recordHeight(commit: number, z: number): void {
    this.state.heightTrace.push({ commit, z })
    this.updateChecklist(z)
  }

  private updateChecklist(z: number): void {
    for (const stage of this.state.stages) {
      if (!stage.done && z >= stage.expectedHeight * (1 - STAGE_TOLERANCE)) {
        stage.done = true
      }
    }
  }

  /** Per-ring mean of the live phase registers, for the panel readout. */
  ringAggregatePhase(level: number): number {
    const phases = this.ringChannels(level).map((ch) => this.state.device.live_phases[ch])
    return phases.reduce((a, b) => a + b, 0) / phases.length
  }

  displayedHeight(): number {
    return this.state.particle.position[2]
  }

  private notify(): void {
    if (this.onChange) this.onChange()
  }
}
