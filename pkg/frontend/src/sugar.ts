/**
 * Ergonomic builders over the generated element classes. The classes
 * track the schema 1:1; these helpers only assemble common shapes
 * (timed events, oscillator actions, decisions, whole experiments).
 */
import { Attrs, AttrValue, Expression, ExpressionLike, toExpression, XmlElement } from "./base.js";
import {
  Argument,
  Amplitude,
  Condition,
  DDSAction,
  Decision,
  Definitions,
  Event,
  Experiment,
  Frequency,
  FunctionCall,
  GateCall,
  Header,
  Headers,
  InitialSetup,
  InterpP0,
  InterpP1,
  Measure,
  NumericLiteral,
  Parameter,
  Phase,
  Program,
  Qubit,
  Resource,
  Resources,
  Segment,
  StartTime,
  StartTimeMode,
  Threshold,
  Duration,
  TTLSet,
  Level,
} from "./elements.gen.js";

export const lit = (value: number, units?: string): NumericLiteral =>
  new NumericLiteral(value, units);

export function startTime(value: ExpressionLike, stype?: StartTimeMode): StartTime {
  return new StartTime(toExpression(value), stype === undefined ? {} : { stype });
}

/** A timed event; the start time may be a bare expression or StartTime. */
export function event(
  start: ExpressionLike | StartTime,
  ...items: XmlElement[]
): Event {
  const head = start instanceof StartTime ? start : startTime(start);
  return new Event({}, head, ...items);
}

export interface DDSActionOpts {
  channel: string;
  interp_type?: string;
  amplitude?: ExpressionLike;
  frequency?: ExpressionLike;
  phase?: ExpressionLike;
  interp_p0?: ExpressionLike;
  interp_p1?: ExpressionLike;
}

export function ddsAction(opts: DDSActionOpts): DDSAction {
  const attrs: Attrs = { channel: opts.channel };
  if (opts.interp_type !== undefined) attrs.interp_type = opts.interp_type;
  const children: XmlElement[] = [];
  if (opts.amplitude !== undefined) children.push(new Amplitude(opts.amplitude));
  if (opts.frequency !== undefined) children.push(new Frequency(opts.frequency));
  if (opts.phase !== undefined) children.push(new Phase(opts.phase));
  if (opts.interp_p0 !== undefined) children.push(new InterpP0(opts.interp_p0));
  if (opts.interp_p1 !== undefined) children.push(new InterpP1(opts.interp_p1));
  return new DDSAction(attrs, ...children);
}

export function ttlSet(channel: string, level: ExpressionLike): TTLSet {
  return new TTLSet({ channel }, new Level(level));
}

export type CallArg = ExpressionLike | { ref: string };

function buildArguments(args: Record<string, CallArg> | undefined): Argument[] {
  if (args === undefined) return [];
  return Object.entries(args).map(([name, value]) => {
    if (typeof value === "object" && value !== null && "ref" in value) {
      return new Argument({ name, ref: value.ref });
    }
    return new Argument({ name }, toExpression(value as ExpressionLike));
  });
}

export function functionCall(
  name: string,
  args?: Record<string, CallArg>,
): FunctionCall {
  return new FunctionCall({ name }, ...buildArguments(args));
}

export interface GateCallOpts {
  /** Positional qubit indices, or a port-name to index map. */
  qubits?: number[] | Record<string, number>;
  args?: Record<string, CallArg>;
}

export function gateCall(name: string, opts: GateCallOpts = {}): GateCall {
  const children: XmlElement[] = [];
  if (Array.isArray(opts.qubits)) {
    for (const index of opts.qubits) children.push(new Qubit(index));
  } else if (opts.qubits !== undefined) {
    for (const [port, index] of Object.entries(opts.qubits)) {
      children.push(new Qubit(index, { port }));
    }
  }
  children.push(...buildArguments(opts.args));
  return new GateCall({ name }, ...children);
}

export function measure(opts: {
  channel: string;
  resource: string;
  duration: ExpressionLike;
  threshold?: ExpressionLike;
}): Measure {
  const children: XmlElement[] = [new Duration(opts.duration)];
  if (opts.threshold !== undefined) children.push(new Threshold(opts.threshold));
  return new Measure({ channel: opts.channel, resource: opts.resource }, ...children);
}

export function condition(
  state: string | number,
  destinationSegment: string,
): Condition {
  return new Condition({
    state: String(state),
    destination_segment: destinationSegment,
  });
}

export function decision(opts: {
  resource: string | string[];
  conditions: (Condition | [string | number, string])[];
  threshold?: ExpressionLike;
}): Decision {
  const resource = Array.isArray(opts.resource)
    ? opts.resource.join(" ")
    : opts.resource;
  const children: XmlElement[] = [];
  if (opts.threshold !== undefined) children.push(new Threshold(opts.threshold));
  for (const c of opts.conditions) {
    children.push(c instanceof Condition ? c : condition(c[0], c[1]));
  }
  return new Decision({ resource }, ...children);
}

export function segment(name: string | null, ...items: XmlElement[]): Segment {
  return new Segment(name === null ? {} : { name }, ...items);
}

export function program(...segments: Segment[]): Program {
  return new Program({}, ...segments);
}

export function resource(opts: {
  name: string;
  kind?: "counter" | "generic";
  length?: number;
}): Resource {
  return new Resource(opts as unknown as Attrs);
}

let apdCounter = 0;

/** A single-slot counter resource with an auto-assigned name. */
export function apdCounterResource(name?: string): Resource {
  const assigned = name ?? `r${apdCounter++}`;
  return resource({ name: assigned, kind: "counter", length: 1 });
}

export function resetAutoNames(): void {
  apdCounter = 0;
}

export function initialSetup(
  usePredefined?: string,
  parameters?: Record<string, ExpressionLike>,
): InitialSetup {
  const attrs: Attrs = {};
  if (usePredefined !== undefined) attrs.use_predefined = usePredefined;
  const children = Object.entries(parameters ?? {}).map(
    ([name, value]) => new Parameter({ name }, toExpression(value)),
  );
  return new InitialSetup(attrs, ...children);
}

export function experiment(opts: {
  program: Program | Segment[];
  resources?: Resource[];
  initial_setup?: InitialSetup;
  headers?: Header[];
  definitions?: XmlElement[];
}): Experiment {
  const children: XmlElement[] = [];
  if (opts.resources !== undefined && opts.resources.length > 0) {
    children.push(new Resources({}, ...opts.resources));
  }
  if (opts.initial_setup !== undefined) children.push(opts.initial_setup);
  if (opts.headers !== undefined && opts.headers.length > 0) {
    children.push(new Headers({}, ...opts.headers));
  }
  if (opts.definitions !== undefined && opts.definitions.length > 0) {
    children.push(new Definitions({}, ...opts.definitions));
  }
  children.push(
    Array.isArray(opts.program) ? program(...opts.program) : opts.program,
  );
  return new Experiment({}, ...children);
}
