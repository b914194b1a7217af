import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const here = dirname(fileURLToPath(import.meta.url));
export const repoRoot = join(here, "..", "..");

export function tempDir(): string {
  return mkdtempSync(join(tmpdir(), "binding-"));
}

export interface CliResult {
  status: number;
  stdout: string;
  stderr: string;
}

/** Run the toolchain CLI; the binding talks to it only through files. */
export function cli(...args: string[]): CliResult {
  const proc = spawnSync("python3", ["-m", "pulsestack.cli", ...args], {
    cwd: repoRoot,
    encoding: "utf-8",
  });
  return { status: proc.status ?? -1, stdout: proc.stdout, stderr: proc.stderr };
}

const CANONICALIZE = `
import sys
from pulsestack.xml_io import parse_experiment, serialize_xml
sys.stdout.write(serialize_xml(parse_experiment(open(sys.argv[1]).read())))
`;

/** Parse a program with the toolchain and return its canonical XML. */
export function canonicalize(path: string): string {
  const proc = spawnSync("python3", ["-c", CANONICALIZE, path], {
    cwd: repoRoot,
    encoding: "utf-8",
  });
  if (proc.status !== 0) {
    throw new Error(`canonicalize failed for ${path}:\n${proc.stderr}`);
  }
  return proc.stdout;
}

const PARSE_FRAGMENT = `
import sys
from pulsestack.xml_io import parse_xml, serialize_xml
node = parse_xml(open(sys.argv[1]).read())
sys.stdout.write(serialize_xml(node, declaration=False))
`;

export function parseFragment(xml: string): { status: number; canonical: string; stderr: string } {
  const dir = tempDir();
  const path = join(dir, "fragment.xml");
  writeFileSync(path, xml);
  const proc = spawnSync("python3", ["-c", PARSE_FRAGMENT, path], {
    cwd: repoRoot,
    encoding: "utf-8",
  });
  return { status: proc.status ?? -1, canonical: proc.stdout, stderr: proc.stderr };
}

export function writeTemp(name: string, content: string): string {
  const dir = tempDir();
  const path = join(dir, name);
  writeFileSync(path, content);
  return path;
}

export function corpusText(name: string): string {
  return readFileSync(join(repoRoot, "tests", "corpus", name), "utf-8");
}
