// DOM wiring for the operator console. One session per tab.

import { ServiceClient } from './api.js'
import { drawAxialPotential, drawHeightTrace } from './plots.js'
import { ConsoleSession, NUDGE_LARGE, NUDGE_SMALL } from './session.js'

const SERVICE_URL =
  new URLSearchParams(location.search).get('service') ?? 'http://127.0.0.1:8000'

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  if (cls) node.className = cls
  if (text !== undefined) node.textContent = text
  return node
}

async function boot(): Promise<void> {
  const client = new ServiceClient(SERVICE_URL)
  const session = await ConsoleSession.open(client)

  const root = document.getElementById('app')!
  const panel = el('div', 'panel')
  const status = el('div', 'status')
  const ringBox = el('div', 'rings')
  const rawBox = el('div', 'raw')
  const stageBox = el('div', 'stages')
  const potCanvas = el('canvas', 'plot')
  potCanvas.width = 640
  potCanvas.height = 240
  const traceCanvas = el('canvas', 'plot')
  traceCanvas.width = 640
  traceCanvas.height = 160
  root.append(status, panel)
  panel.append(ringBox, rawBox, stageBox, potCanvas, traceCanvas)

  // per-ring toggle + nudge controls
  const ringRows: HTMLDivElement[] = []
  for (let level = 1; level <= session.state.device.rings; level++) {
    const row = el('div', 'ring-row')
    const toggle = el('button', 'toggle')
    toggle.onclick = () => void session.toggleRing(level)
    row.append(el('span', 'ring-label', `ring ${level}`), toggle)
    for (const steps of [-NUDGE_LARGE, -NUDGE_SMALL, NUDGE_SMALL, NUDGE_LARGE]) {
      const btn = el('button', 'nudge', steps > 0 ? `+${steps}` : `${steps}`)
      btn.onclick = () => void session.nudgeRing(level, steps)
      row.append(btn)
    }
    row.append(el('span', 'phase-readout'))
    ringRows.push(row)
    ringBox.append(row)
  }

  // raw wire-grammar input
  const input = el('input')
  input.placeholder = 'raw command, e.g. SET 14 750'
  const send = el('button', undefined, 'send')
  send.onclick = () => {
    void session.dispatchLine(input.value).then(() => (input.value = ''))
  }
  input.onkeydown = (ev) => {
    if (ev.key === 'Enter') send.click()
  }
  const errorLine = el('div', 'error')
  rawBox.append(input, send, errorLine)

  // stage checklist with auto-run buttons
  const script = await session.loadScript()
  const stageRows = script.stages.map((stage, i) => {
    const row = el('div', 'stage-row')
    const run = el('button', undefined, `auto-run ${stage.name}`)
    run.onclick = () => void session.autoRunStage(i)
    row.append(
      el('span', 'stage-check'),
      el('span', 'stage-label', `${stage.name}: ${(stage.expected_height * 1e3).toFixed(1)} mm`),
      run,
    )
    stageBox.append(row)
    return row
  })

  const render = (): void => {
    const st = session.state
    status.textContent =
      `session ${st.sessionId} | commit ${st.device.commit_counter} | ` +
      `height ${(session.displayedHeight() * 1e3).toFixed(2)} mm` +
      (st.particle.escaped ? ' | ESCAPED' : st.particle.settled ? ' | settled' : '')
    ringRows.forEach((row, i) => {
      const on = st.device.ring_enable[i]
      const toggle = row.querySelector('.toggle') as HTMLButtonElement
      toggle.textContent = on ? 'ON' : 'OFF'
      toggle.classList.toggle('is-on', on)
      const readout = row.querySelector('.phase-readout') as HTMLSpanElement
      readout.textContent = `phase ~${session.ringAggregatePhase(i + 1).toFixed(0)}`
    })
    errorLine.textContent = st.lastError ?? ''
    stageRows.forEach((row, i) => {
      const check = row.querySelector('.stage-check') as HTMLSpanElement
      check.textContent = st.stages[i]?.done ? '[x]' : '[ ]'
    })
    if (st.profile) {
      drawAxialPotential(potCanvas, st.profile, session.displayedHeight(), st.nodes)
    }
    drawHeightTrace(traceCanvas, st.heightTrace, script.target_height)
  }
  session.onChange = render

  // live push channel; profile is re-fetched after each event so the
  // potential curve tracks the committed phases
  const ws = new WebSocket(client.eventsUrl(session.state.sessionId))
  ws.onmessage = (msg) => {
    session.applyEvent(JSON.parse(msg.data))
    void session.refreshProfile()
  }

  await session.refreshProfile()
  await session.refresh()
}

void boot()
