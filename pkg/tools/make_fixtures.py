"""Regenerate the bundled datasets and the toy cluster lexicon.

    python3 tools/make_fixtures.py

Everything is drawn from a fixed seed, so the output is reproducible.
"""
import json
import random
import re
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "src" / "slu" / "resources"

ROOMS = ["kitchen", "living room", "bedroom", "bathroom", "hall", "garage", "office",
         "basement", "attic", "dining room", "guest bedroom", "kids room", "laundry room",
         "porch", "garden", "study", "hallway", "nursery", "pantry", "cellar"]
ROOM_SYNONYMS = {"living room": ["lounge"], "hall": ["corridor"], "kids room": ["playroom"]}
COLORS = ["blue", "red", "green", "yellow", "white", "purple", "orange", "pink",
          "warm white", "cyan", "magenta", "turquoise"]

SLOT_RE = re.compile(r"\{(\w+)(?::(\w+))?\}")


def utterance(template, fillers):
    """'set the {room} lights' + {'room': ('room', 'kitchen')} -> dataset chunks."""
    data, pos = [], 0
    for m in SLOT_RE.finditer(template):
        if m.start() > pos:
            data.append({"text": template[pos:m.start()]})
        slot = m.group(1)
        entity, text = fillers[slot]
        data.append({"text": text, "entity": entity, "slot_name": slot})
        pos = m.end()
    if pos < len(template):
        data.append({"text": template[pos:]})
    return {"data": data}


def surface(rng, template):
    """Light surface variation that normalization removes."""
    if rng.random() < 0.3:
        template = template[0].upper() + template[1:]
    r = rng.random()
    if r < 0.1:
        template += "!"
    elif r < 0.2:
        template += "."
    return template


def number_text(rng, n):
    words = {0: "zero", 10: "ten", 20: "twenty", 25: "twenty five", 30: "thirty", 40: "forty",
             50: "fifty", 60: "sixty", 70: "seventy", 75: "seventy five", 80: "eighty",
             90: "ninety", 100: "one hundred"}
    if n in words and rng.random() < 0.3:
        return words[n]
    return str(n)


def generate(rng, grammar, per_intent):
    intents = {}
    for intent, templates in grammar.items():
        utts, seen = [], set()
        tries = 0
        while len(utts) < per_intent and tries < per_intent * 50:
            tries += 1
            template = surface(rng, rng.choice(templates))
            fillers = {}
            for m in SLOT_RE.finditer(template):
                slot, kind = m.group(1), m.group(2) or m.group(1)
                fillers[slot] = FILLERS[kind](rng)
            template = SLOT_RE.sub(lambda m: "{" + m.group(1) + "}", template)
            u = utterance(template, fillers)
            key = json.dumps(u, sort_keys=True)
            if key not in seen:
                seen.add(key)
                utts.append(u)
        intents[intent] = {"utterances": utts}
    return intents


FILLERS = {
    "room": lambda rng: ("room", rng.choice(ROOMS + ["lounge", "corridor"])),
    "color": lambda rng: ("color", rng.choice(COLORS)),
    "brightness": lambda rng: ("brightness", number_text(rng, rng.choice(range(0, 101, 5)))),
    "temperature": lambda rng: ("snips/temperature", rng.choice([
        f"{rng.randint(16, 26)}°C", f"{rng.randint(60, 78)} degrees fahrenheit",
        f"{rng.randint(16, 26)} degrees", f"{rng.randint(16, 26)} degrees celsius"])),
}


def room_entity():
    return {"values": [{"value": r, "synonyms": ROOM_SYNONYMS.get(r, [])} for r in ROOMS],
            "automatically_extensible": True}


def smart_lights(rng):
    grammar = {
        "SwitchLightOn": [
            "turn on the lights", "turn on the lights in the {room}", "switch on the {room} lights",
            "lights on in the {room}", "please turn the {room} lights on",
            "can you turn on the light in the {room}", "i want the lights on in the {room}",
            "switch the light on in the {room}", "turn the {room} light on please"],
        "SwitchLightOff": [
            "turn off the lights", "turn off the lights in the {room}", "switch off the {room} lights",
            "lights off in the {room}", "kill the lights in the {room}", "shut off the {room} lights",
            "please turn the {room} lights off", "switch the light off in the {room}",
            "no more light in the {room}"],
        "SetLightColor": [
            "set the {room} lights to {color}", "make the lights {color} in the {room}",
            "change the color of the {room} lights to {color}", "i want {color} lights in the {room}",
            "set the lights to {color}", "paint the {room} {color}", "turn the {room} lights {color}",
            "can i have {color} light in the {room}"],
        "SetLightBrightness": [
            "set the brightness to {brightness}", "set the {room} lights brightness to {brightness}",
            "put the brightness at {brightness} in the {room}", "brightness {brightness} in the {room}",
            "set the lights in the {room} to level {brightness}", "change the brightness to {brightness}",
            "adjust the {room} brightness to {brightness}"],
        "IncreaseBrightness": [
            "turn up the lights in the {room}", "brighten the {room}", "make the {room} brighter",
            "increase the brightness in the {room}", "more light in the {room} please",
            "turn up the lights", "raise the lights in the {room}", "brighter lights in the {room}"],
        "DecreaseBrightness": [
            "turn down the lights in the {room}", "dim the lights in the {room}", "make the {room} darker",
            "decrease the brightness in the {room}", "less light in the {room} please",
            "dim the lights", "lower the lights in the {room}", "darker lights in the {room}"],
    }
    return {"language": "en", "intents": generate(rng, grammar, 50),
            "entities": {"room": room_entity(),
                         "color": {"values": [{"value": c, "synonyms": []} for c in COLORS],
                                   "automatically_extensible": False},
                         "brightness": {"builtin": "snips/number"}}}


def thermostat(rng):
    grammar = {
        "SetTemperature": [
            "set the temperature to {temperature} in the {room}", "set the {room} to {temperature}",
            "i want {temperature} in the {room}", "make it {temperature} in the {room}",
            "heat the {room} to {temperature}", "set the temperature to {temperature}",
            "please set the {room} temperature to {temperature}",
            "change the thermostat to {temperature} in the {room}"],
        "GetTemperature": [
            "what is the temperature in the {room}", "how warm is the {room}",
            "what's the temperature", "tell me the temperature in the {room}",
            "how cold is it in the {room}", "what temperature is it in the {room}"],
        "SwitchOffHeating": [
            "turn off the heating", "switch off the heating in the {room}",
            "stop heating the {room}", "no more heating in the {room}", "turn the heater off"],
    }
    return {"language": "en", "intents": generate(rng, grammar, 40),
            "entities": {"room": room_entity(),
                         "snips/temperature": {"builtin": "snips/temperature"}}}


def fake_names(rng, n, syllables, lo=2, hi=3):
    out = set()
    while len(out) < n:
        name = "".join(rng.choice(syllables) for _ in range(rng.randint(lo, hi)))
        if rng.random() < 0.2:
            name = rng.choice(["new ", "port ", "san ", "east "]) + name
        out.add(name)
    return sorted(out)


def synthetic_template(rng):
    """One intent, three slots, big value pools: most test values are unseen."""
    cities = fake_names(rng, 150, ["ka", "lo", "mir", "ven", "to", "sa", "bel", "dra", "ny", "qu",
                                   "rho", "ta", "zen", "vi", "or", "lun"])
    airlines = [n + " air" for n in fake_names(rng, 40, ["jet", "sky", "aero", "nor", "blu", "vol"], 1, 2)]
    templates = [
        "book a flight from {origin:city} to {destination:city}",
        "i need to fly to {destination:city} from {origin:city}",
        "find me a ticket to {destination:city}", "get me a {airline} flight to {destination:city}",
        "fly me from {origin:city} to {destination:city} with {airline}",
        "are there any flights to {destination:city}", "i want to go from {origin:city} to {destination:city}",
        "show {airline} flights from {origin:city}", "is there a cheap flight to {destination:city} on {airline}",
        "leaving {origin:city} tomorrow heading to {destination:city}",
        "what does {airline} charge to {destination:city}", "departing from {origin:city}",
        "i am in {origin:city} and need to reach {destination:city}",
        "one way to {destination:city} please", "a return trip from {origin:city}",
        "can {airline} take me to {destination:city}", "from {origin:city} to {destination:city} next week",
        "my trip starts in {origin:city}", "get me out of {origin:city}",
        "i would like to visit {destination:city} by {airline}", "search {airline} for {destination:city}",
        "cheapest way from {origin:city} to {destination:city}", "destination {destination:city}",
        "flights out of {origin:city} on {airline}",
    ]
    global FILLERS
    saved = dict(FILLERS)
    FILLERS["city"] = lambda r: ("city", r.choice(cities))
    FILLERS["airline"] = lambda r: ("airline", r.choice(airlines))
    try:
        intents = generate(rng, {"BookFlight": templates}, 1000)
    finally:
        FILLERS = saved
    return {"language": "en", "intents": intents,
            "entities": {"city": {"values": [{"value": c, "synonyms": []} for c in cities[:15]],
                                  "automatically_extensible": True},
                         "airline": {"values": [{"value": a, "synonyms": []} for a in airlines[:8]],
                                     "automatically_extensible": True}}}


def planted_errors(rng):
    """Small lights dataset with one wrong intent and one missing slot annotation."""
    grammar = {
        "SwitchLightOn": ["turn on the lights in the {room}", "switch on the {room} lights",
                          "switch on the lights", "lights on in the {room}", "turn on the lights"],
        "SwitchLightOff": ["turn off the lights in the {room}", "switch off the {room} lights",
                           "lights off in the {room}", "turn off the lights", "switch off the lamp"],
        "SetLightBrightness": ["set the brightness to {brightness}",
                               "set the {room} brightness to {brightness}",
                               "brightness {brightness} in the {room}"],
    }
    intents = generate(rng, grammar, 18)
    intents["SwitchLightOn"]["utterances"].append({"data": [{"text": "switch off the lights"}]})
    intents["SetLightBrightness"]["utterances"].append({"data": [{"text": "set the brightness to 60"}]})
    return {"language": "en", "intents": intents,
            "entities": {"room": room_entity(), "brightness": {"builtin": "snips/number"}}}


def toy_clusters():
    """A 200-word lexicon: related words share a bit-string prefix."""
    groups = [
        ("0000", ["the", "a", "an", "this", "that", "my", "your", "some", "any", "every"]),
        ("0001", ["in", "on", "at", "to", "from", "of", "for", "with", "by", "into", "out", "off"]),
        ("0010", ["turn", "switch", "set", "make", "change", "put", "adjust", "dim", "raise", "lower",
                  "increase", "decrease", "brighten", "kill", "shut", "stop", "heat", "paint", "play",
                  "book", "find", "get", "show", "fly", "search", "call", "tell", "give"]),
        ("0011", ["lights", "light", "lamp", "brightness", "color", "colour", "temperature",
                  "thermostat", "heating", "heater", "level", "flight", "flights", "ticket", "trip"]),
        ("0100", ["kitchen", "bedroom", "bathroom", "hall", "garage", "office", "basement", "attic",
                  "porch", "garden", "study", "hallway", "nursery", "pantry", "cellar", "lounge",
                  "corridor", "playroom", "room", "living", "dining", "guest", "kids", "laundry"]),
        ("0101", ["blue", "red", "green", "yellow", "white", "purple", "orange", "pink", "warm",
                  "cyan", "magenta", "turquoise", "black", "brown", "gray"]),
        ("0110", ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
                  "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
                  "seventeen", "eighteen", "nineteen", "twenty", "thirty", "forty", "fifty",
                  "sixty", "seventy", "eighty", "ninety", "hundred", "thousand"]),
        ("0111", ["degrees", "degree", "celsius", "fahrenheit", "percent", "minutes", "hours",
                  "days", "weeks", "months"]),
        ("1000", ["today", "tomorrow", "yesterday", "tonight", "morning", "afternoon", "evening",
                  "night", "week", "month", "year", "monday", "tuesday", "wednesday", "thursday",
                  "friday", "saturday", "sunday"]),
        ("1001", ["i", "you", "me", "it", "we", "want", "need", "would", "like", "can", "could",
                  "please", "is", "are", "what", "how", "there", "be", "have", "do", "go", "is",
                  "and", "or", "not", "no", "more", "less", "up", "down", "brighter", "darker",
                  "cheap", "cheapest", "next", "one", "way", "return", "visit", "reach"]),
    ]
    table = {}
    for prefix, words in groups:
        for k, w in enumerate(words):
            if w not in table:
                table[w] = prefix + format(k % 8, "03b")
    words = sorted(table)[:200]
    return "".join(f"{w}\t{table[w]}\n" for w in words)


def main():
    (OUT / "datasets").mkdir(parents=True, exist_ok=True)
    (OUT / "clusters").mkdir(parents=True, exist_ok=True)
    builders = {"smart_lights": smart_lights, "thermostat": thermostat,
                "synthetic_template": synthetic_template, "planted_errors": planted_errors}
    for k, (name, build) in enumerate(builders.items()):
        d = build(random.Random(1000 + k))
        (OUT / "datasets" / f"{name}.json").write_text(
            json.dumps(d, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    (OUT / "clusters" / "toy_brown.tsv").write_text(toy_clusters(), encoding="utf-8")


if __name__ == "__main__":
    main()
