#!/usr/bin/env python3
"""Writes dataset.jsonl and script.jsonl for the scripted evaluation fixture.

Each agent gets a fixed prediction per item; the expected verdicts are the
`*_ok` columns below and are what the eval tests assert against.
"""
import json
import pathlib

HERE = pathlib.Path(__file__).resolve().parent
PLANNER = "system:You are the planner of a web research assistant"
REACT = "system:You answer questions by searching the web."

# id, tag, question, gold answers, (nosearch, react, mindsearch) predictions
ITEMS = [
    ("q01", "Bamboogle", "In which town was the Lumen Observatory founded?", ["Varrow"],
     ("Varrow", "Varrow.", "Varrow")),
    ("q02", "Bamboogle", "In which season is the Aster Festival held?", ["spring"],
     ("Spring", "spring", "Spring.")),
    ("q03", "Bamboogle", "Which river flows past the Lumen Observatory?", ["Selwyn river", "Selwyn"],
     ("The Thames", "the Selwyn river", "Selwyn")),
    ("q04", "2-hop", "In what year was the observatory in Varrow founded?", ["1874"],
     ("1900", "1875", "1874")),
    ("q05", "2-hop", "Who founded the Lumen Observatory?", ["Ada Merrin"],
     ("Ada Merrin", "Ada Merrin", "Ada Merrin.")),
    ("q06", "2-hop", "What kind of town hosts the Aster Festival?", ["harbour town", "a harbour town"],
     ("A river town", "A harbour town", "harbour town")),
    ("q07", "3-hop", "Which academy runs the observatory founded by Ada Merrin?", ["Varrow Academy of Sciences"],
     ("Royal Society", "The Academy", "Varrow Academy of Sciences")),
    ("q08", "3-hop", "How many bands play at the festival held in Quillon?", ["forty", "40"],
     ("thirty", "fifty", "40")),
    ("q09", "3-hop", "What was the first telescope of the observatory on the Selwyn river?", ["20 cm refractor", "a 20 cm refractor"],
     ("A 20 cm refractor", "a 20 cm refractor", "20 cm refractor")),
    ("q10", "Easy", "In which town is the Aster Festival held?", ["Quillon"],
     ("Varrow", "Quillon", "Quillon")),
    ("q11", "Easy", "What kind of town is Varrow?", ["university town"],
     ("harbour town", "market town", "A university town")),
    ("q12", "Easy", "Where does the Selwyn river end?", ["the sea", "sea"],
     ("a lake", "the ocean", "In a delta")),
]


def rule(matchers, response):
    return {"match": [{"kind": k, "value": v} for k, v in matchers], "response": response}


def code(body):
    return "Plan:\n```python\n" + body + "```"


def main():
    questions = [q for _, _, q, _, _ in ITEMS]
    for a in questions:
        for b in questions:
            assert a == b or a not in b, (a, b)

    dataset = [
        {"id": i, "question": q, "answers": gold, "tags": [tag]} for i, tag, q, gold, _ in ITEMS
    ]
    rules = []
    for _, _, q, _, (_, react, _) in ITEMS:
        keywords = q.rstrip("?")
        rules.append(rule([("role", REACT), ("role", "user:" + q), ("turn", "0")],
                          f'Thought: I should look this up.\nAction: search("{keywords}")'))
        rules.append(rule([("role", REACT), ("role", "user:" + q), ("turn", "1")],
                          f"Thought: The results answer it.\nFinal Answer: {react}"))
    for _, _, q, _, (_, _, mind) in ITEMS:
        turn0 = (f'graph.add_node(node_name="lookup", node_content="{q}")\n'
                 'graph.add_edge(start_node="root", end_node="lookup")\n')
        turn1 = ('graph.add_node(node_name="response", node_content="final answer")\n'
                 'graph.add_edge(start_node="lookup", end_node="response")\n')
        rules.append(rule([("role", PLANNER), ("role", "user:" + q), ("turn", "0")], code(turn0)))
        rules.append(rule([("role", PLANNER), ("role", "user:" + q), ("turn", "1")], code(turn1)))
        rules.append(rule([("role", PLANNER), ("role", "user:" + q), ("turn", "2")], mind))
    rules.append({"matcher_kind": "contains", "matcher_value": "QUERY REWRITE", "response": ""})
    rules.append({"matcher_kind": "contains", "matcher_value": "PAGE SELECTION", "response": "1, 2"})
    rules.append({"matcher_kind": "contains", "matcher_value": "SUMMARIZE", "response": "See the first page [1]."})
    for _, _, q, _, (nosearch, _, _) in ITEMS:
        rules.append(rule([("contains", q)], nosearch))

    (HERE / "dataset.jsonl").write_text("".join(json.dumps(d) + "\n" for d in dataset))
    (HERE / "script.jsonl").write_text("".join(json.dumps(r) + "\n" for r in rules))


if __name__ == "__main__":
    main()
