#!/usr/bin/env python3
"""Regenerates the shipped lexicon snapshot and POS tag dictionary.

The lexicon is written in the Princeton WordNet data-file layout
(data.noun, data.verb, data.adj, data.adv) with real byte offsets, so the
Rust parser can also read genuine WordNet 3.x data files.

Usage: python3 scripts/gen_lexicon.py
"""

import os

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
LEX_DIR = os.path.join(ROOT, "crates", "core", "data", "lexicon")
TAGS = os.path.join(ROOT, "crates", "core", "data", "tags.tsv")

# key -> (lemmas, hypernym key or None, gloss)
NOUNS = {
    "entity": (["entity"], None, "that which exists"),
    "abstraction": (["abstraction"], "entity", "a general concept"),
    "artifact": (["artifact", "artefact"], "entity", "a man-made object"),
    "organism": (["organism", "being"], "entity", "a living thing"),
    "substance": (["substance", "matter"], "entity", "physical material"),
    "communication": (["communication"], "abstraction", "something communicated"),
    "show": (["show"], "communication", "a public entertainment"),
    "film": (["film", "movie", "picture", "flick", "motion_picture"], "show", "a recorded story shown in a theater"),
    "documentary": (["documentary", "docudrama"], "film", "a film presenting facts"),
    "thriller": (["thriller"], "film", "a suspenseful film"),
    "cartoon": (["cartoon", "animation"], "film", "an animated film"),
    "blockbuster": (["blockbuster"], "film", "a very successful film"),
    "sequel": (["sequel"], "film", "a film continuing an earlier one"),
    "remake": (["remake"], "film", "a new version of an old film"),
    "drama": (["drama"], "show", "a dramatic work"),
    "comedy": (["comedy"], "drama", "a light and humorous drama"),
    "farce": (["farce", "slapstick"], "comedy", "broad comedy"),
    "tragedy": (["tragedy"], "drama", "a drama with a sad ending"),
    "story": (["story", "narrative", "tale"], "communication", "an account of events"),
    "plot": (["plot", "storyline"], "story", "the story of a work"),
    "subplot": (["subplot"], "plot", "a secondary plot"),
    "twist": (["twist"], "plot", "an unexpected development"),
    "music": (["music"], "communication", "organized sound"),
    "soundtrack": (["soundtrack"], "music", "music accompanying a film"),
    "song": (["song", "tune"], "music", "a short piece of music"),
    "dialogue": (["dialogue", "dialog"], "communication", "lines spoken by characters"),
    "writing": (["writing"], "communication", "written work"),
    "script": (["script", "screenplay"], "writing", "the written text of a film"),
    "book": (["book", "volume"], "writing", "a written work"),
    "novel": (["novel"], "book", "a long fictional narrative"),
    "part": (["part", "portion"], "abstraction", "something less than the whole"),
    "scene": (["scene", "episode"], "part", "a subdivision of a film"),
    "ending": (["ending", "conclusion", "finish"], "part", "the last part"),
    "beginning": (["beginning", "opening", "start"], "part", "the first part"),
    "act": (["act", "deed"], "abstraction", "something that is done"),
    "performance": (["performance", "acting"], "act", "the act of performing a role"),
    "activity": (["activity"], "act", "a pursuit"),
    "game": (["game"], "activity", "a contest with rules"),
    "sport": (["sport", "athletics"], "activity", "physical competition"),
    "basketball": (["basketball", "hoops"], "sport", "a court game"),
    "person": (["person", "individual", "someone", "somebody"], "organism", "a human being"),
    "entertainer": (["entertainer"], "person", "a person who entertains"),
    "actor": (["actor", "performer", "player"], "entertainer", "a theatrical performer"),
    "star": (["star", "lead"], "actor", "an actor who plays a principal role"),
    "extra": (["extra"], "actor", "a performer with a minor role"),
    "comedian": (["comedian", "comic"], "entertainer", "a professional performer of comedy"),
    "creator": (["creator", "maker"], "person", "a person who creates"),
    "director": (["director", "filmmaker"], "creator", "the person who directs a film"),
    "writer": (["writer", "author"], "creator", "a person who writes"),
    "expert": (["expert"], "person", "a person with special knowledge"),
    "critic": (["critic", "reviewer"], "expert", "a person who judges works"),
    "friend": (["friend", "buddy", "pal"], "person", "a person you know and like"),
    "gathering": (["gathering", "assemblage"], "abstraction", "a group of people"),
    "audience": (["audience", "viewers"], "gathering", "the people watching a show"),
    "crowd": (["crowd", "throng"], "gathering", "a large number of people"),
    "food": (["food", "nutrient"], "substance", "material eaten for nourishment"),
    "meal": (["meal", "repast"], "food", "food served at one time"),
    "snack": (["snack", "bite"], "meal", "a light meal"),
    "popcorn": (["popcorn"], "snack", "popped corn kernels"),
    "dish": (["dish"], "food", "a particular item of food"),
    "dessert": (["dessert", "sweet"], "dish", "a sweet course"),
    "structure": (["structure", "construction"], "artifact", "a constructed thing"),
    "building": (["building", "edifice"], "structure", "a structure with walls and a roof"),
    "theater": (["theater", "theatre", "cinema"], "building", "a building where films are shown"),
    "ball": (["ball"], "artifact", "a round object used in games"),
    "thing": (["thing"], "entity", "an entity that is not named"),
    "experience": (["experience"], "abstraction", "something that happens to you"),
    "time": (["time"], "abstraction", "a period"),
    "evening": (["evening", "eve"], "time", "the end of the day"),
    "hour": (["hour"], "time", "a period of sixty minutes"),
    "price": (["price", "cost"], "abstraction", "the amount of money needed"),
    "effect": (["effect", "special_effect"], "abstraction", "a visual illusion in a film"),
    "character": (["character", "role"], "abstraction", "an imaginary person in a story"),
    "villain": (["villain", "baddie"], "character", "a wicked character"),
    "hero": (["hero", "protagonist"], "character", "the principal character"),
}

VERBS = {
    "feel": (["feel", "experience"], None, "undergo an emotional sensation"),
    "dislike": (["dislike"], "feel", "have or feel a dislike"),
    "hate": (["hate", "detest"], "dislike", "dislike intensely"),
    "loathe": (["loathe", "abhor", "abominate"], "hate", "find repugnant"),
    "despise": (["despise", "disdain", "scorn"], "dislike", "look down on"),
    "like": (["like"], "feel", "find enjoyable"),
    "love": (["love", "adore"], "like", "have great affection for"),
    "cherish": (["cherish", "treasure"], "love", "be fond of"),
    "enjoy": (["enjoy", "relish", "savor", "savour"], "like", "take delight in"),
    "perceive": (["perceive", "comprehend"], None, "become aware of"),
    "watch": (["watch", "view", "see"], "perceive", "look attentively"),
    "observe": (["observe", "witness"], "watch", "watch attentively"),
    "communicate": (["communicate", "intercommunicate"], None, "transmit information"),
    "advise": (["advise", "counsel"], "communicate", "give advice to"),
    "recommend": (["recommend", "urge", "advocate"], "advise", "push for something"),
    "express": (["express", "state"], "communicate", "give expression to"),
    "praise": (["praise", "laud"], "express", "express approval of"),
    "evaluate": (["evaluate", "judge", "assess"], None, "form a critical opinion of"),
    "criticize": (["criticize", "criticise", "knock"], "evaluate", "find fault with"),
    "pan": (["pan", "trash"], "criticize", "criticize harshly"),
    "displease": (["displease"], None, "give displeasure to"),
    "annoy": (["annoy", "irritate", "bother", "rile"], "displease", "cause annoyance"),
    "disappoint": (["disappoint", "let_down"], "displease", "fail to meet the hopes of"),
    "bore": (["bore", "tire"], "displease", "cause to be bored"),
    "affect": (["affect", "touch"], None, "have an emotional effect on"),
    "impress": (["impress", "strike"], "affect", "impress positively"),
    "move": (["move", "go"], None, "change location"),
    "leave": (["leave", "exit", "depart"], "move", "go away from a place"),
    "rest": (["rest"], None, "take a short break"),
    "sleep": (["sleep", "slumber"], "rest", "be asleep"),
    "laugh": (["laugh", "chuckle"], "express", "produce laughter"),
    "cry": (["cry", "weep"], "express", "shed tears"),
    "waste": (["waste", "squander"], None, "spend thoughtlessly"),
    "regret": (["regret", "rue"], "feel", "feel remorse for"),
}

ADJS = {
    "good": ["good", "fine", "nice"],
    "great": ["great", "outstanding", "excellent", "superb", "splendid"],
    "bad": ["bad", "poor", "awful", "terrible", "dreadful"],
    "boring": ["boring", "dull", "tedious", "tiresome"],
    "interesting": ["interesting", "engaging", "absorbing"],
    "funny": ["funny", "amusing", "humorous"],
    "beautiful": ["beautiful", "lovely", "gorgeous"],
    "ugly": ["ugly", "hideous"],
    "long": ["long", "lengthy", "prolonged"],
    "brief": ["brief", "short"],
    "delicious": ["delicious", "tasty", "flavorful", "luscious"],
    "acceptable": ["acceptable", "satisfactory", "adequate"],
    "predictable": ["predictable", "foreseeable", "formulaic"],
    "original": ["original", "fresh", "innovative"],
    "slow": ["slow", "sluggish"],
    "stupid": ["stupid", "dumb", "silly"],
    "brilliant": ["brilliant", "dazzling"],
    "wonderful": ["wonderful", "marvelous", "fantastic", "terrific"],
    "mediocre": ["mediocre", "average", "so-so"],
    "enjoyable": ["enjoyable", "pleasant", "pleasurable"],
    "confusing": ["confusing", "puzzling", "baffling"],
    "sad": ["sad", "unhappy", "sorrowful"],
    "happy": ["happy", "glad", "cheerful"],
}

ADVS = {
    "really": ["really", "truly", "genuinely"],
    "very": ["very", "extremely", "highly"],
    "badly": ["badly", "poorly"],
    "well": ["well"],
    "completely": ["completely", "totally", "entirely", "utterly", "wholly"],
    "always": ["always", "ever"],
    "never": ["never"],
    "barely": ["barely", "hardly", "scarcely"],
    "quickly": ["quickly", "rapidly", "fast"],
    "slowly": ["slowly"],
    "definitely": ["definitely", "surely", "certainly"],
    "honestly": ["honestly", "frankly"],
    "simply": ["simply", "just", "merely"],
}

ANTONYMS = [("good", "bad"), ("happy", "sad"), ("boring", "interesting")]

HEADER = [
    "  1 testforge lexicon snapshot.",
    "  2 Layout follows the WordNet 3.0 data files; offsets are byte offsets.",
    "  3 Regenerate with scripts/gen_lexicon.py.",
]

LEX_FILENUM = {"n": 3, "v": 37, "a": 0, "r": 2}
POS_FILE = {"n": "data.noun", "v": "data.verb", "a": "data.adj", "r": "data.adv"}


def build_synsets():
    synsets = {}  # (pos, key) -> dict
    for pos, table in (("n", NOUNS), ("v", VERBS)):
        for key, (lemmas, hyper, gloss) in table.items():
            synsets[(pos, key)] = {"lemmas": lemmas, "ptrs": [], "gloss": gloss, "type": pos}
        for key, (_, hyper, _) in table.items():
            if hyper is not None:
                synsets[(pos, key)]["ptrs"].append(("@", (pos, hyper)))
                synsets[(pos, hyper)]["ptrs"].append(("~", (pos, key)))
    for pos, table in (("a", ADJS), ("r", ADVS)):
        for key, lemmas in table.items():
            synsets[(pos, key)] = {
                "lemmas": lemmas,
                "ptrs": [],
                "gloss": "having the quality of being " + key if pos == "a" else "in a manner: " + key,
                "type": pos,
            }
    for a, b in ANTONYMS:
        synsets[("a", a)]["ptrs"].append(("!", ("a", b)))
        synsets[("a", b)]["ptrs"].append(("!", ("a", a)))
    # predicative marker on one adjective lemma exercises marker stripping
    synsets[("a", "sad")]["lemmas"] = ["sad(a)", "unhappy", "sorrowful"]
    return synsets


def render_line(offset, key, syn, offsets):
    pos = key[0]
    words = " ".join(f"{lemma} 0" for lemma in syn["lemmas"])
    ptrs = " ".join(
        f"{sym} {offsets[target]:08d} {target[0]} 0000" for sym, target in syn["ptrs"]
    )
    parts = [
        f"{offset:08d}",
        f"{LEX_FILENUM[pos]:02d}",
        syn["type"],
        f"{len(syn['lemmas']):02x}",
        words,
        f"{len(syn['ptrs']):03d}",
    ]
    if ptrs:
        parts.append(ptrs)
    if pos == "v":
        parts.append("01 + 08 00")
    return " ".join(parts) + " | " + syn["gloss"] + "  \n"


def write_files(synsets):
    os.makedirs(LEX_DIR, exist_ok=True)
    # offsets depend on line lengths, and line lengths on offsets only through
    # zero-padded 8-digit fields, so a single layout pass is exact.
    offsets = {}
    for pos in "nvar":
        cursor = sum(len(h) + 1 for h in HEADER)
        for key in [k for k in synsets if k[0] == pos]:
            offsets[key] = cursor
            cursor += len(render_line(0, key, synsets[key], {k: 0 for k in synsets}).encode())
    for pos in "nvar":
        path = os.path.join(LEX_DIR, POS_FILE[pos])
        with open(path, "w", newline="\n") as fh:
            for h in HEADER:
                fh.write(h + "\n")
            for key in [k for k in synsets if k[0] == pos]:
                line = render_line(offsets[key], key, synsets[key], offsets)
                assert fh.tell() == offsets[key], (key, fh.tell(), offsets[key])
                fh.write(line)


FUNCTION_WORDS = """i you he she it we they me him her us them my your his its our their this that these those
the a an and or but if then than so because as of in on at to for with about from by into over after before
during under again not no nor don't doesn't didn't isn't wasn't can't won't couldn't wouldn't shouldn't
what which who whom whose when where why how all any both each few more most other some such only own same
too can will would should could may might must shall there here everything anything nothing something
everyone anyone nobody""".split()

BE_VERBS = "is was are were be been being am has have had do does did".split()


def inflections(pos, lemma):
    if pos == "n":
        if lemma.endswith(("s", "x", "ch", "sh")):
            return [lemma + "es"]
        if lemma.endswith("y") and lemma[-2] not in "aeiou":
            return [lemma[:-1] + "ies"]
        return [lemma + "s"]
    if pos == "v":
        if lemma.endswith("e"):
            return [lemma + "s", lemma + "d", lemma[:-1] + "ing"]
        if lemma.endswith("y") and lemma[-2] not in "aeiou":
            return [lemma[:-1] + "ies", lemma[:-1] + "ied", lemma + "ing"]
        return [lemma + "s", lemma + "ed", lemma + "ing"]
    return []


def write_tags(synsets):
    tags = {}
    tag_name = {"n": "NOUN", "v": "VERB", "a": "ADJ", "r": "ADV"}
    # verbs and adjectives take priority over nouns for ambiguous lemmas
    for pos in "rvan":
        for key, syn in synsets.items():
            if key[0] != pos:
                continue
            for lemma in syn["lemmas"]:
                lemma = lemma.split("(")[0].lower()
                if "_" in lemma:
                    continue
                tags.setdefault(lemma, tag_name[pos])
                for form in inflections(pos, lemma):
                    tags.setdefault(form, tag_name[pos])
    for w in FUNCTION_WORDS:
        tags[w] = "OTHER"
    for w in BE_VERBS:
        tags[w] = "VERB"
    for w in ["liked", "hated", "loved", "watched", "enjoyed", "saw", "felt", "left", "went", "made", "thought", "found"]:
        tags[w] = "VERB"
    with open(TAGS, "w", newline="\n") as fh:
        fh.write("# word\ttag (generated by scripts/gen_lexicon.py)\n")
        for w in sorted(tags):
            fh.write(f"{w}\t{tags[w]}\n")


if __name__ == "__main__":
    syns = build_synsets()
    write_files(syns)
    write_tags(syns)
