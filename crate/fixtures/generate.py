"""Regenerates the scale, persona and demo fixtures.

Run from the repository root: python3 fixtures/generate.py
"""
import json
import os
import re

ROOT = os.path.dirname(os.path.abspath(__file__))

BIG_FIVE = [
    ("O", "Openness: curious and open to new ideas and experiences", [
        "Imagination: has a vivid imagination",
        "Artistic interests: values art and beauty",
        "Emotionality: is aware of own feelings",
        "Adventurousness: likes trying new activities",
        "Intellect: enjoys thinking about abstract ideas",
    ]),
    ("C", "Conscientiousness: organized, careful and dependable", [
        "Self-efficacy: feels able to get things done",
        "Orderliness: keeps things tidy and planned",
        "Dutifulness: keeps promises and follows rules",
        "Achievement-striving: works hard to reach goals",
        "Self-discipline: finishes tasks without delay",
    ]),
    ("E", "Extraversion: sociable, talkative and energetic", [
        "Friendliness: warms up to people quickly",
        "Gregariousness: enjoys being part of a group",
        "Assertiveness: speaks up and takes the lead",
        "Activity level: is always busy and on the move",
        "Cheerfulness: radiates joy and enthusiasm",
    ]),
    ("A", "Agreeableness: kind, trusting and cooperative", [
        "Trust: believes others have good intentions",
        "Morality: is honest and sincere",
        "Altruism: likes to help others",
        "Cooperation: avoids quarrels and seeks agreement",
        "Modesty: does not brag about achievements",
    ]),
    ("N", "Neuroticism: prone to worry and negative emotions", [
        "Anxiety: worries about things",
        "Anger: gets irritated easily",
        "Depression: often feels down",
        "Self-consciousness: is easily embarrassed",
        "Vulnerability: panics under pressure",
    ]),
]

STERNBERG = [
    ("LEG", "Legislative style: likes to create and plan things in their own way", [
        "Lets students design their own projects",
        "Encourages students to formulate their own questions",
        "Prefers assignments that let students choose how to work",
        "Asks students to invent new approaches to problems",
        "Values original ideas over correct routines",
        "Builds lessons around open-ended tasks",
        "Invites students to propose class activities",
    ]),
    ("EXE", "Executive style: likes to follow rules and given structures", [
        "Follows the textbook closely",
        "Gives students clear step-by-step instructions",
        "Expects students to use the methods taught in class",
        "Prefers tasks with one correct procedure",
        "Keeps to the planned schedule",
        "Values accuracy in following directions",
        "Uses worked examples before practice",
    ]),
    ("JUD", "Judicial style: likes to evaluate and compare ideas", [
        "Asks students to compare different solutions",
        "Has students judge the quality of arguments",
        "Encourages peer review of work",
        "Asks students to justify every step",
        "Discusses the strengths and weaknesses of methods",
        "Uses debates to examine ideas",
        "Asks students to critique textbook examples",
    ]),
    ("GLO", "Global style: focuses on the big picture", [
        "Starts a topic with its overall purpose",
        "Connects lessons to broader themes",
        "Prefers general concepts to small details",
        "Summarizes the main idea at the end of class",
        "Uses concept maps to show relations",
        "Explains why a topic matters before how it works",
        "Links mathematics to real-world situations",
    ]),
    ("LOC", "Local style: focuses on concrete details", [
        "Emphasizes precise details in solutions",
        "Checks each calculation carefully",
        "Prefers specific exercises to general discussion",
        "Corrects small notation errors",
        "Breaks problems into small steps",
        "Drills individual skills",
        "Asks for exact definitions",
    ]),
    ("LIB", "Liberal style: likes change and new ways of doing things", [
        "Tries new teaching methods often",
        "Uses games and novel activities",
        "Changes the lesson plan when students show interest",
        "Welcomes unconventional answers",
        "Experiments with technology in class",
        "Varies the seating and grouping",
        "Encourages students to take intellectual risks",
    ]),
    ("CON", "Conservative style: prefers familiar and proven ways", [
        "Relies on methods that worked in past years",
        "Keeps classroom routines stable",
        "Prefers traditional homework",
        "Avoids untested activities",
        "Teaches topics in the usual order",
        "Values discipline and order",
        "Uses the same assessment format each term",
    ]),
]

SOLOMON = [
    ("AR", "Processing: active (a) or reflective (b)", [
        "To understand something I (a) try it out (b) think it through",
        "In a study group I (a) jump in with ideas (b) listen first",
        "I would rather be known as (a) outgoing (b) reserved",
        "When learning something new I (a) discuss it (b) think about it alone",
        "In class I prefer (a) activities (b) time to think",
        "I tend to (a) act before thinking (b) think before acting",
        "I remember best what I (a) did (b) thought about",
        "For homework I prefer to (a) work with others (b) work alone",
        "I (a) make friends easily (b) have a few close friends",
        "In discussions I am (a) quick to speak (b) slow to speak",
        "I learn more from (a) doing exercises (b) reading explanations",
    ]),
    ("SI", "Perception: sensing (a) or intuitive (b)", [
        "I would rather be (a) practical (b) innovative",
        "I prefer (a) facts (b) ideas and theories",
        "I like teachers who (a) give concrete examples (b) explain concepts",
        "I prefer problems that are (a) familiar (b) new",
        "I am more (a) careful with details (b) creative",
        "I like (a) real-world applications (b) abstract patterns",
        "When reading I prefer (a) step-by-step content (b) big ideas",
        "I am more comfortable with (a) certainty (b) possibilities",
        "I would rather (a) follow a method (b) find a new method",
        "I find it easier to learn (a) facts (b) concepts",
        "I consider it more important to be (a) thorough (b) imaginative",
    ]),
    ("VV", "Input: visual (a) or verbal (b)", [
        "I remember best (a) what I see (b) what I hear",
        "I prefer (a) diagrams and graphs (b) written directions",
        "When I think of yesterday I see (a) pictures (b) words",
        "I like teachers who (a) draw on the board (b) explain in words",
        "I understand a graph (a) at a glance (b) after reading about it",
        "I prefer (a) videos (b) lectures",
        "I recall (a) faces (b) names",
        "For directions I prefer (a) a map (b) written steps",
        "In a book I look at (a) the figures first (b) the text first",
        "I remember (a) colors and shapes (b) explanations",
        "I take notes with (a) sketches (b) sentences",
    ]),
    ("SG", "Understanding: sequential (a) or global (b)", [
        "I learn (a) step by step (b) in big jumps",
        "I prefer to (a) master each step (b) see the whole first",
        "When solving problems I (a) work in order (b) find the answer suddenly",
        "I prefer courses that (a) build steadily (b) give the overview first",
        "When I read I (a) go through in order (b) skip around",
        "I (a) understand parts before the whole (b) need the whole to see the parts",
        "I like explanations that are (a) logical (b) holistic",
        "I tend to (a) follow detailed plans (b) work with rough plans",
        "In a new topic I want (a) the first step (b) the big picture",
        "When writing I (a) start at the beginning (b) write sections in any order",
        "I prefer to (a) finish one task at a time (b) juggle several",
    ]),
]


def score_scale(name, instrument, root_desc, groups, leaf_range, values):
    nodes = [{"id": root_desc[0], "description": root_desc[1], "children": [g[0] for g in groups]}]
    for (gid, gdesc, items), vals in zip(groups, values):
        assert len(vals) == len(items)
        nodes.append({"id": gid, "description": gdesc, "score": sum(vals),
                      "children": [f"{gid}{i + 1}" for i in range(len(items))]})
        for i, (desc, v) in enumerate(zip(items, vals)):
            assert leaf_range[0] <= v <= leaf_range[1]
            nodes.append({"id": f"{gid}{i + 1}", "description": desc, "score": v, "range": list(leaf_range)})
    for n in nodes:
        if n["id"] in {g[0] for g in groups}:
            n["range"] = [leaf_range[0] * len(n["children"]), leaf_range[1] * len(n["children"])]
    return {"name": name, "kind": "score_based", "instrument": instrument, "root": root_desc[0], "nodes": nodes}


def big_five(values):
    return score_scale("Big Five", "big_five", ("BF", "Big Five personality"), BIG_FIVE, (1, 5), values)


def sternberg(values):
    return score_scale("Sternberg Thinking Styles in Teaching", "sternberg",
                       ("TS", "Sternberg thinking styles in teaching"), STERNBERG, (1, 7), values)


def solomon(patterns):
    nodes = [{"id": "LS", "description": "Solomon learning styles", "children": [g[0] for g in SOLOMON]}]
    for (gid, gdesc, items), pattern in zip(SOLOMON, patterns):
        assert len(pattern) == len(items)
        nodes.append({"id": gid, "description": gdesc, "children": [f"{gid}{i + 1}" for i in range(len(items))]})
        for i, (desc, c) in enumerate(zip(items, pattern)):
            nodes.append({"id": f"{gid}{i + 1}", "description": desc, "choice": c})
    return {"name": "Solomon Learning Styles", "kind": "choice_based", "instrument": "solomon", "root": "LS",
            "nodes": nodes}


PERSONAS = {
    "smith": {
        "name": "Mrs. Smith",
        "career": "Mathematics teacher",
        "basic_info": "Mrs. Smith has taught ninth-grade mathematics for fifteen years. She is patient, encouraging and well organized.",
        "big_five": [[4, 4, 4, 4, 5], [5, 5, 5, 4, 5], [4, 4, 4, 4, 4], [4, 5, 5, 4, 4], [2, 2, 2, 2, 2]],
        "sternberg": [[5, 5, 4, 5, 4, 5, 4], [6, 6, 5, 5, 6, 6, 6], [6, 5, 5, 6, 5, 5, 4],
                      [6, 6, 5, 6, 5, 6, 6], [4, 5, 4, 4, 5, 4, 4], [5, 6, 5, 5, 4, 4, 6], [3, 4, 3, 3, 4, 4, 3]],
    },
    "emily": {
        "name": "Emily",
        "career": "Student",
        "basic_info": "Emily is a ninth-grade student with average grades in mathematics. She is expressive and lively but gets anxious when facing mathematical challenges.",
        "big_five": [[4, 4, 5, 3, 3], [3, 3, 3, 3, 3], [5, 5, 4, 5, 5], [4, 4, 4, 4, 3], [5, 3, 3, 4, 4]],
        "solomon": ["AAABAAAABAA", "AABAABAAABA", "AAAAABAABAA", "ABAABAABAAB"],
    },
    "john": {
        "name": "John",
        "career": "Student",
        "basic_info": "John is a steady ninth-grade student who does his homework and speaks up now and then.",
        "big_five": [[3, 3, 3, 3, 3], [3, 4, 3, 3, 3], [3, 3, 3, 3, 3], [4, 3, 3, 4, 3], [3, 2, 3, 3, 3]],
        "solomon": ["ABABABABABA", "AAABBAABAAB", "BABABAABBAA", "AABBAABABAA"],
    },
    "ryan": {
        "name": "Ryan",
        "career": "Student",
        "basic_info": "Ryan is an outgoing ninth-grade student who loves discussing ideas with classmates.",
        "big_five": [[4, 4, 3, 4, 3], [3, 3, 3, 3, 3], [5, 5, 4, 4, 4], [4, 3, 3, 4, 3], [2, 2, 2, 2, 2]],
        "solomon": ["AAAAAAABAAA", "BABBAABBABB", "AABAAABAAAB", "BBABBBABBAB"],
    },
    "samantha": {
        "name": "Samantha",
        "career": "Student",
        "basic_info": "Samantha is a quiet, introverted ninth-grade student who prefers to think before speaking.",
        "big_five": [[4, 4, 3, 2, 4], [4, 4, 4, 3, 4], [2, 1, 1, 2, 2], [4, 4, 4, 4, 4], [3, 2, 3, 4, 3]],
        "solomon": ["BBBABBBBABB", "AAABAAABAAB", "BBABBBABBAB", "AAAABAAABAA"],
    },
    "ying_zheng": {
        "name": "Ying Zheng",
        "career": "Student",
        "basic_info": "Ying Zheng is an industrious ninth-grade student with a passion for learning and exploring different solutions.",
        "big_five": [[5, 4, 3, 4, 5], [5, 5, 5, 5, 5], [3, 3, 4, 4, 3], [4, 4, 4, 4, 4], [2, 2, 2, 2, 2]],
        "solomon": ["ABAABAABABA", "BBABBBABBBA", "AAABAAAABAA", "AAABAABAAAA"],
    },
}

STUDENT_ORDER = ["john", "emily", "ryan", "samantha", "ying_zheng"]


def persona_scales(p):
    scales = [big_five(p["big_five"])]
    if "sternberg" in p:
        scales.append(sternberg(p["sternberg"]))
    if "solomon" in p:
        scales.append(solomon(p["solomon"]))
    return scales


def write(path, doc):
    full = os.path.join(ROOT, path)
    os.makedirs(os.path.dirname(full), exist_ok=True)
    with open(full, "w") as f:
        json.dump(doc, f, indent=2, ensure_ascii=False)
        f.write("\n")


def probe_entries(p):
    entries = []
    prefix = r"\AYou are " + re.escape(p["name"]) + ","
    for scale in persona_scales(p):
        for node in scale["nodes"]:
            if node["id"] == scale["root"]:
                continue
            value = node.get("score", node.get("choice"))
            if value is None:
                a = sum(1 for n in scale["nodes"] if n["id"] in node["children"] and n["choice"] == "A")
                value = "A" if a > len(node["children"]) - a else "B"
            entries.append({"match": "regex", "pattern": prefix + r"(?s:.*)Node " + re.escape(node["id"]) + ":",
                            "response": str(value), "tag": "persona_probe"})
    return entries


def e(match, pattern, response, tag=None, uses=None):
    entry = {"match": match, "pattern": pattern, "response": response}
    if tag:
        entry["tag"] = tag
    if uses:
        entry["max_uses"] = uses
    return entry


TEACHER = r"\AYou are Mrs\. Smith,"

PLAN = """Topic: Concept of the Quadratic Equation
Objectives:
- Recognise the general form of a quadratic function
- Explain how the coefficients b and c change the graph
- Solve a quadratic equation in more than one way
Stages:
1. Introduction: Greet the class and recall what a quadratic function looks like
   Criterion: A student has stated the general form ax^2 + bx + c
2. Exploration: Investigate how the coefficients shape the graph
   Criterion: A student has described the effect of b and c
3. Practice: Solve equations and compare different solutions
   Criterion: At least one student has explored different solution methods"""

TEACHER_LINES = [
    "Good morning, class! Today we begin the concept of the quadratic equation.",
    "Can anyone tell me the general form of a quadratic function?",
    "Excellent work, Emily! Don't worry, every question we try makes us stronger.",
    "How do coefficients b and c affect the graph of a quadratic function?",
    "Ying Zheng, can you explore different solutions?",
    "Let's write down today's summary: a quadratic equation has the form ax^2 + bx + c = 0 with a not equal to zero.",
]

VERDICTS = [
    "CONTINUE\nThe class has not recalled the general form yet.",
    "ADVANCE\nEmily stated the general form.",
    "CONTINUE\nThe effect of the coefficients has not been discussed yet.",
    "ADVANCE\nRyan described how b and c move the graph.",
    "CONTINUE\nYing Zheng is exploring solutions; time to summarize.",
    "END\nThe practice goals are met.",
]

WILLINGNESS = {
    "Can anyone tell me the general form": {"John": 3, "Emily": 5, "Ryan": 4, "Samantha": 2, "Ying Zheng": 4},
    "How do coefficients b and c": {"John": 3, "Emily": 3, "Ryan": 5, "Samantha": 2, "Ying Zheng": 4},
}


def demo_script():
    s = []
    for key in ["smith"] + STUDENT_ORDER:
        s += probe_entries(PERSONAS[key])
    s.append(e("substring", "Write a teaching plan", PLAN, "teaching_plan"))
    for line in TEACHER_LINES:
        s.append(e("regex", TEACHER, line, "act", 1))
    s.append(e("regex", r"\AYou are Emily,(?s:.*)## Persona correction",
               "I'm really nervous about this lesson, but I think the general form is y = ax^2 + bx + c.", "act"))
    s.append(e("regex", r"\AYou are Emily,", "Easy! I already know everything about quadratics.", "act"))
    s.append(e("regex", r"\AYou are Ryan,",
               "Maybe we could have a discussion with classmates: b moves the graph sideways and c moves it up and down.", "act"))
    s.append(e("regex", r"\AYou are Ying Zheng,",
               "I have a real passion for learning! We could factor it, complete the square, or use the quadratic formula.", "act"))
    s.append(e("regex", r"\AYou are Samantha,", "Um, I think a cannot be zero.", "act"))
    s.append(e("regex", r"\AYou are John,", "I think the answer is x equals two.", "act"))
    s.append(e("regex", TEACHER + r"(?s:.*)I'm really nervous about this lesson",
               "Emily said: \"I'm really nervous about this lesson.\" She still gave the general form y = ax^2 + bx + c.",
               "distill_cot"))
    s.append(e("regex", TEACHER, "The class is starting quadratic equations; I opened the lesson and asked for the general form.",
               "distill_cot"))
    s.append(e("regex", TEACHER, "Greet, ask for the general form, then connect the coefficients to the graph.", "distill_coa"))
    s.append(e("regex", TEACHER + r"(?s:.*)nervous",
               "Emily is anxious about mathematics. I should encourage her and keep practice playful.", "reflect"))
    s.append(e("regex", TEACHER, "The class is attentive and ready for the next step.", "reflect"))
    s.append(e("regex", TEACHER + r"(?s:.*)nervous",
               "Praise Emily, then ask how b and c change the graph, and invite Ying Zheng to explore different solutions.", "plan"))
    s.append(e("regex", TEACHER, "Move on to the next question in the plan.", "plan"))
    s.append(e("substring", "## Working memory", "We are learning about quadratic equations.", "distill_cot"))
    s.append(e("substring", "## Working memory", "Listen carefully and answer when asked.", "distill_coa"))
    s.append(e("substring", "Reflect", "I want to keep taking part.", "reflect"))
    s.append(e("substring", "Plan", "Answer the next question briefly.", "plan"))
    s.append(e("substring", "Easy! I already know everything",
               "INCONSISTENT\nEmily is anxious and unsure about mathematics; let her voice some nervousness.", "consistency"))
    s.append(e("substring", "## Draft line by", "CONSISTENT", "consistency"))
    s.append(e("substring", "## Teacher line\nCan anyone tell me", "CLASS", "classify"))
    s.append(e("substring", "## Teacher line\nHow do coefficients", "CLASS", "classify"))
    s.append(e("substring", "## Teacher line\nYing Zheng, can you", "STUDENT: Ying Zheng", "classify"))
    s.append(e("substring", "## Teacher line", "STATEMENT", "classify"))
    for question, scores in WILLINGNESS.items():
        for name, score in scores.items():
            s.append(e("regex", r"## Student\n" + re.escape(name) + r"\n(?s:.*)## Question\n" + re.escape(question),
                       f"SCORE: {score}\nREASON: {name} is responding to the question in character.", "willingness"))
    for verdict in VERDICTS:
        s.append(e("substring", "## Current stage", verdict, "supervisor", 1))
    return s


SKILLS = [
    {"id": "encouragement", "tags": ["nervous", "anxious", "encouragement"],
     "content": "Encourage anxious students with specific praise and small, achievable steps."},
    {"id": "gamification", "tags": ["game", "engagement", "playful"],
     "content": "Turn practice into a short game with points or a friendly challenge."},
    {"id": "targeted-questioning", "tags": ["explore", "different solutions"],
     "content": "Ask a named student to explore an alternative solution and explain it to the class."},
    {"id": "graph-connection", "tags": ["graph", "coefficients"],
     "content": "Link each coefficient to a visible change in the graph before generalizing."},
]


def main():
    write("scales/bigfive.json", big_five(PERSONAS["smith"]["big_five"]))
    write("scales/sternberg.json", sternberg(PERSONAS["smith"]["sternberg"]))
    write("scales/solomon.json", solomon(PERSONAS["emily"]["solomon"]))
    for key, p in PERSONAS.items():
        write(f"personas/{key}.json", {"name": p["name"], "career": p["career"], "basic_info": p["basic_info"],
                                       "scales": persona_scales(p)})
    write("demo/skills.json", SKILLS)
    write("demo/script.json", demo_script())
    write("demo/scenario.json", {
        "topic": "Concept of the Quadratic Equation",
        "teacher": "../personas/smith.json",
        "students": [f"../personas/{k}.json" for k in STUDENT_ORDER],
        "skill_library": "skills.json",
        "prompt_templates": "templates.json",
        "backend": {"kind": "scripted", "script": "script.json", "cassette": "cassette.json",
                    "http": {"model": "gpt-3.5-turbo-16k"}},
        "selection_mode": "willingness",
        "seed": 7,
        "limits": {"max_turns": 20, "max_stage_turns": 6, "working_memory_capacity": 20, "skill_k": 3,
                   "context_window": 10},
        "persona_check_m": 2,
        "distill_every": 1,
    })
    write("drift/script.json", [e("substring", "Node ", "1", "persona_probe")])
    write("drift/scenario.json", {
        "topic": "Concept of the Quadratic Equation",
        "teacher": "../personas/smith.json",
        "students": [f"../personas/{k}.json" for k in STUDENT_ORDER],
        "skill_library": "../demo/skills.json",
        "backend": {"kind": "scripted", "script": "script.json"},
        "selection_mode": "willingness",
        "seed": 7,
        "persona_check_m": 0,
    })


if __name__ == "__main__":
    main()
