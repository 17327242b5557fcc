"""Independent oracle for the three-turn example golden snapshot.

Builds the expected snapshot from the scripted planner turns alone: node
order follows the order of add_node statements, digests are the first eight
hex digits of sha256 over the node content, edges are sorted.
"""
import hashlib
import json
import re
import sys
from pathlib import Path

here = Path(__file__).resolve().parent.parent / "fixtures" / "three_turn"
question = sys.argv[1] if len(sys.argv) > 1 else (here / "question.txt").read_text().rstrip("\n")

def digest(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:8]

rules = [json.loads(l) for l in (here / "script.jsonl").read_text().splitlines() if l.strip() and not l.startswith("#")]
planner_turns = [r["response"] for r in rules if any(m.get("kind") == "role" for m in r.get("match", []))]

nodes = [("root", "Start", question)]
edges = set()
for text in planner_turns[:-1]:
    for name, content in re.findall(r'add_node\(node_name="([^"]+)", node_content="([^"]+)"\)', text):
        nodes.append((name, "End" if name == "response" else "Search", content))
    for a, b in re.findall(r'add_edge\(start_node="([^"]+)", end_node="([^"]+)"\)', text):
        edges.add((a, b))

out = []
for seq, (name, kind, content) in enumerate(nodes):
    out.append(f"node {name} {kind} Done {seq} {digest(content)}")
for a, b in sorted(edges):
    out.append(f"edge {a} {b}")
print("\n".join(out))
