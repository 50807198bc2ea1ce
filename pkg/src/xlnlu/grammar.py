"""Synthetic flight-domain utterance generator.

Templates mix surface alternations with slot placeholders drawn from closed
value pools.  Two properties matter more than realism.  First, most function
words sit in alternation groups, so few word pairs co-occur deterministically:
perfectly collocated words are indistinguishable to co-occurrence statistics,
which caps both EM translation tables and attention-based alignment.  Common
words deliberately recur across several groups and templates while the
from/to scaffold around city slots keeps one dominant context, which gives
high-frequency anchors a stable signature.  Second, sentences stay short
(four to eleven tokens), so each encoder state is dominated by its own token
rather than by accumulated context.  Slot values are single tokens, and a few
surface forms are shared across pools (fare limits and flight numbers) so
lexical identity alone does not resolve every tag.
"""

import numpy as np

from .corpus import LabeledUtterance

CITIES = [
    "boston", "denver", "atlanta", "chicago", "dallas", "seattle", "memphis",
    "oakland", "pittsburgh", "nashville", "phoenix", "detroit", "orlando",
    "tucson",
]
AIRLINES = ["delta", "united", "american", "continental", "northwest", "lufthansa", "twa"]
DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
TIMES = ["morning", "afternoon", "evening", "noon", "night", "midnight"]
CLASSES = ["coach", "economy", "business", "premium"]
PRICES = ["200", "400", "1000"]
AIRPORTS = ["logan", "jfk", "laguardia", "midway", "ohare"]
FLIGHT_NUMBERS = ["101", "202", "400", "200", "77", "1055"]

POOLS = {
    "from_city": CITIES,
    "to_city": CITIES,
    "stop_city": CITIES,
    "airline": AIRLINES,
    "depart_day": DAYS,
    "depart_time": TIMES,
    "flight_class": CLASSES,
    "price_limit": PRICES,
    "airport": AIRPORTS,
    "flight_number": FLIGHT_NUMBERS,
}

TEMPLATES = {
    "find_flight": [
        "{show|list|display} {me|us} {flights|trips} {from|leaving} {from_city} {to|into} {to_city}",
        "{i|we} {need|want} {a|any} {flight|trip} {from|leaving} {from_city} {to|into} {to_city} {on|next} {depart_day}",
        "{list|show|find} {flights|trips} {from|leaving} {from_city} {to|into} {to_city} {departing|leaving} {in|around} {the|that} {depart_time}",
        "{find|get} {me|us} {a|any} {airline} {flight|trip} {from|leaving} {from_city} {to|into} {to_city}",
        "{flights|trips} {from|leaving} {from_city} {to|into} {to_city} {stopping|connecting} {in|through} {stop_city}",
    ],
    "book_flight": [
        "{book|reserve} {a|one} {flight|trip} {from|leaving} {from_city} {to|into} {to_city}",
        "{book|reserve} {a|one} {seat|place} {on|aboard} {airline} {flight|plane} {flight_number}",
        "{book|put} {me|us} on {the|that} {depart_time} {flight|trip} {to|into} {to_city} {on|next} {depart_day}",
    ],
    "cancel_flight": [
        "{cancel|drop} {my|our} {flight|trip} {to|into} {to_city}",
        "{cancel|drop} {the|that} {airline} {flight|trip} {flight_number}",
        "{please|kindly} {cancel|drop} {my|our} {depart_day} {reservation|booking} {to|into} {to_city}",
    ],
    "flight_price": [
        "{whats|quote} {the|a} {price|fare} {of|for} {a|one} {flight|ticket} {from|leaving} {from_city} {to|into} {to_city}",
        "{how|what} {much|high} {is|runs} {the|that} {flight_class} {fare|price} {to|into} {to_city}",
        "{fares|prices} {from|leaving} {from_city} {to|into} {to_city} {under|below} {price_limit}",
        "{how|what} much does {the|that} {depart_time} {flight|trip} {to|into} {to_city} {cost|run}",
    ],
    "flight_time": [
        "{what|which} {time|hour} does {flight|plane} {flight_number} {leave|depart} {from_city}",
        "{what|which} {time|hour} do {flights|trips} {arrive|land} {in|at} {to_city} {from|leaving} {from_city}",
        "{departure|arrival} {times|schedule} {for|of} {airline} {from|leaving} {from_city}",
        "{what|which} {time|hour} does {flight|plane} {flight_number} {arrive|land} {in|at} {to_city}",
    ],
    "list_airlines": [
        "{which|what} {airlines|carriers} {fly|operate} {from|leaving} {from_city} {to|into} {to_city}",
        "{what|which} {airlines|carriers} {serve|use} {airport}",
        "{airlines|carriers} {with|offering} {service|flights} {to|into} {to_city}",
    ],
    "seat_availability": [
        "{are|any} {seats|places} {left|remaining} {on|aboard} {airline} {flight|plane} {flight_number}",
        "{any|some} {flight_class} {seats|places} {to|into} {to_city} {on|next} {depart_day}",
        "{what|which} {seats|places} {remain|exist} {on|aboard} {the|that} {depart_time} {flight|trip} {to|into} {to_city}",
    ],
    "airport_info": [
        "{how|where} do {i|we} {get|go} {to|into} {airport}",
        "{ground|local} {transportation|transport} {at|near} {airport}",
        "{what|which} {is|seems} {the|that} {closest|nearest} {airport|field} {to|into} {to_city}",
    ],
}
INTENTS = sorted(TEMPLATES)
SLOT_TYPES = sorted(POOLS)


def _realize(template, rng):
    tokens, tags = [], []
    used = set()
    for piece in template.split():
        if piece.startswith("{") and piece.endswith("}"):
            inner = piece[1:-1]
            if "|" in inner:
                options = inner.split("|")
                tokens.append(options[rng.integers(len(options))])
                tags.append("O")
            else:
                pool = POOLS[inner]
                value = pool[rng.integers(len(pool))]
                while value in used:  # never the same city twice in one request
                    value = pool[rng.integers(len(pool))]
                used.add(value)
                tokens.append(value)
                tags.append(f"B-{inner}")
        else:
            tokens.append(piece)
            tags.append("O")
    return tokens, tags


def generate(n, seed, id_prefix="utt"):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        intent = INTENTS[rng.integers(len(INTENTS))]
        template = TEMPLATES[intent][rng.integers(len(TEMPLATES[intent]))]
        tokens, tags = _realize(template, rng)
        out.append(LabeledUtterance(f"{id_prefix}-{k:05d}", tokens, tags, intent))
    return out
