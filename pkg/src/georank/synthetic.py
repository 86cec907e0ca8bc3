"""A generated grid city with planted question/answer pairs.

Every POI sits on a street of a regular grid.  For each QA pair one restaurant
(the target) is placed inside the question's search area and reviewed with a
unique made-up dish; two decoys carrying the same dish and a copy of the
question's wording are placed outside the search area, and a plain restaurant
is placed closer to the reference than the target.  The target is then the
only POI that satisfies both the spatial constraint and the dish keyword.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import geometry as geo
from . import lexicon

CENTER = geo.Coord(-73.98, 40.75)
HALF_SIZE_KM = 3.0
STREET_SPACING_KM = 0.25

DISTRICTS = {  # name -> (west, south, east, north) in km from the center
    "larkfield": (-3.0, 0.0, 0.0, 3.0),
    "ostenby": (0.0, 0.0, 3.0, 3.0),
    "quillmarsh": (-3.0, -3.0, 0.0, 0.0),
    "dovercrest": (0.0, -3.0, 3.0, 0.0),
}
BOROUGH = "vantor"

_LANDMARK_FIRST = ["Amberly", "Brindle", "Corwin", "Delmont", "Everly", "Fenwick", "Garrow", "Halden",
                   "Ivers", "Jessop", "Kestrel", "Lowell", "Marlow", "Norcott", "Pellam", "Rowan"]
_LANDMARK_KIND = ["Fountain", "Tower", "Gardens", "Arch", "Obelisk", "Pavilion", "Bell", "Library"]

_SYLLABLES = ["ka", "vo", "ri", "zel", "mon", "tu", "phi", "dra", "lus", "qen", "bri", "sto", "mau",
              "xan", "pel", "oru", "gim", "fay", "tor", "wex", "jun", "hal", "sif", "yor"]

_GENERIC_REVIEWS = [
    "Friendly staff and fair prices.",
    "The decor is cozy and the music is quiet.",
    "Service was slow on a busy Friday.",
    "Clean tables and polite servers.",
    "Portions are generous for the price.",
    "A good spot for a quick bite.",
    "The lighting is dim and relaxed.",
    "Staff speak several languages.",
    "Cash and cards are both accepted.",
    "Popular with students on weekends.",
]
_GENERIC_SPATIAL = [
    "Located near the corner of {street} Street and {avenue} Avenue.",
    "A short walk from the {avenue} Avenue station.",
    "Close to the {street} Street bus stop.",
]
_OTHER_REVIEWS = {
    "hotel": ["Rooms are quiet and beds are soft.", "The lobby has free coffee."],
    "attraction": ["Worth an afternoon visit.", "Guided tours run every hour."],
    "cafe": ["Strong coffee and fresh pastries.", "Plenty of seats for laptops."],
    "amenity": ["Public restrooms and water fountains.", "Open late on weekdays."],
}
_CATEGORY_MIX = [("restaurant", 0.6), ("hotel", 0.15), ("attraction", 0.1), ("cafe", 0.1), ("amenity", 0.05)]

# what the asker wants; {0}..{3} are the planted dish words
_WANT_FRAMES = [
    "Looking for a restaurant that serves {0} {1} with {2} {3}.",
    "Any restaurant with good {0} {1} and fresh {2} {3}?",
    "Hoping we can eat {0} {1} topped with {2} {3} tonight.",
    "Which restaurant makes the best {0} {1} and {2} {3}?",
    "We crave {0} {1} beside {2} {3} for dinner.",
    "Craving {0} {1} served over {2} {3} at a restaurant.",
]
DECOY_RING_KM = (6.5, 9.0)

_POINT_PHRASES = [  # (spatial sentence template, radius km)
    ("I am staying near {ref}.", 1.0),
    ("I want somewhere within walking distance of {ref}.", 2.0),
    ("Anywhere around {ref} that is not too far is fine.", 3.0),
]


def _ordinal(n: int) -> str:
    suffix = "th" if 10 <= n % 100 <= 20 else {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")
    return f"{n}{suffix}"


@dataclass
class SyntheticCity:
    pois: dict
    gazetteer: dict
    qa: list[dict]
    seed: int
    planted: dict = field(default_factory=dict)  # qid -> {"target", "decoys", "nearer"}

    def write(self, directory) -> dict[str, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {"pois": d / "pois.geojson", "gazetteer": d / "gazetteer.geojson", "qa": d / "qa.jsonl"}
        paths["pois"].write_text(json.dumps(self.pois, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        paths["gazetteer"].write_text(json.dumps(self.gazetteer, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        paths["qa"].write_text("".join(json.dumps(q, sort_keys=True) + "\n" for q in self.qa), encoding="utf-8")
        return paths


class _Builder:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.features: list[dict] = []
        self.used_words: set[str] = set()

    def at(self, east: float, north: float) -> geo.Coord:
        return geo.offset(CENTER, east, north)

    def on_street(self) -> tuple[float, float]:
        rng = self.rng
        along = rng.uniform(-HALF_SIZE_KM, HALF_SIZE_KM)
        line = STREET_SPACING_KM * rng.randint(-int(HALF_SIZE_KM / STREET_SPACING_KM), int(HALF_SIZE_KM / STREET_SPACING_KM))
        return (along, line) if rng.random() < 0.5 else (line, along)

    def address_review(self) -> str:
        tpl = self.rng.choice(_GENERIC_SPATIAL)
        return tpl.format(street=_ordinal(self.rng.randint(1, 24)), avenue=_ordinal(self.rng.randint(1, 12)))

    def pseudo_word(self) -> str:
        while True:
            w = "".join(self.rng.choice(_SYLLABLES) for _ in range(3))
            if w not in self.used_words and w not in lexicon.STOPWORDS and not lexicon.is_spatial_cue(w):
                self.used_words.add(w)
                return w

    def add(self, name: str, category: str, coord: geo.Coord, reviews: list[str]) -> None:
        self.features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [round(coord.lon, 7), round(coord.lat, 7)]},
            "properties": {"name": name, "category": category, "reviews": reviews},
        })

    def filler_reviews(self, category: str) -> list[str]:
        if category == "restaurant":
            base = self.rng.sample(_GENERIC_REVIEWS, 2)
        else:
            base = [self.rng.choice(_OTHER_REVIEWS[category])]
        return base + [self.address_review()]


def _gazetteer(b: _Builder) -> dict:
    feats = []
    for name, (w, s, e, n) in DISTRICTS.items():
        ring = [b.at(w, s), b.at(e, s), b.at(e, n), b.at(w, n), b.at(w, s)]
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [[list(c) for c in ring]]},
            "properties": {"name": name.title(), "level": "neighborhood"},
        })
    h = HALF_SIZE_KM + 0.5
    ring = [b.at(-h, -h), b.at(h, -h), b.at(h, h), b.at(-h, h), b.at(-h, -h)]
    feats.append({
        "type": "Feature",
        "geometry": {"type": "Polygon", "coordinates": [[list(c) for c in ring]]},
        "properties": {"name": BOROUGH.title(), "level": "borough"},
    })
    return {"type": "FeatureCollection", "features": feats}


def generate_city(n_pois: int = 1000, n_qa: int = 100, seed: int = 7,
                  mix: tuple[float, float, float] = (0.5, 0.3, 0.2)) -> SyntheticCity:
    """Build the city: ``n_pois`` POIs in total and ``n_qa`` planted questions.

    ``mix`` gives the share of point, route and region questions.
    """
    b = _Builder(seed)
    rng = b.rng
    gaz = _gazetteer(b)
    regions = {name: geo.from_geojson(f["geometry"]) for name, f in zip(DISTRICTS, gaz["features"])}

    # landmarks: attractions spread over the inner city
    names = [f"{a} {k}" for a in _LANDMARK_FIRST for k in _LANDMARK_KIND]
    rng.shuffle(names)
    landmarks: list[tuple[str, geo.Coord]] = []
    while len(landmarks) < 24:
        e, n = rng.uniform(-2.2, 2.2), rng.uniform(-2.2, 2.2)
        c = b.at(e, n)
        if all(geo.haversine_km(c, other) > 0.8 for _, other in landmarks):
            name = names[len(landmarks)]
            landmarks.append((name, c))
            b.add(name, "attraction", c, ["A well known landmark.", "Visitors take photos here."])

    n_point = round(n_qa * mix[0])
    n_route = round(n_qa * mix[1])
    kinds = ["point"] * n_point + ["route"] * n_route + ["region"] * (n_qa - n_point - n_route)
    qa, planted = [], {}
    for i, kind in enumerate(kinds):
        qid = f"q{i:03d}"
        dish = [b.pseudo_word() for _ in range(4)]
        want = rng.choice(_WANT_FRAMES).format(*dish)
        serves = f"Their {dish[0]} {dish[1]} with {dish[2]} {dish[3]} is excellent."

        if kind == "point":
            ref_name, ref = rng.choice(landmarks)
            tpl, eps = rng.choice(_POINT_PHRASES)
            spatial = tpl.format(ref=ref_name)
            reference: geo.Geometry = geo.Point(*ref)
            refs = [ref_name]
        elif kind == "route":
            (a_name, a), (z_name, z) = rng.sample(landmarks, 2)
            while geo.haversine_km(a, z) < 1.5:
                (a_name, a), (z_name, z) = rng.sample(landmarks, 2)
            scenic = rng.random() < 0.3
            eps = 3.0 if scenic else 1.0
            spatial = (f"We plan a scenic route from {a_name} to {z_name}." if scenic
                       else f"We will walk from {a_name} to {z_name} along the avenue.")
            reference = geo.Polyline((a, z))
            refs = [a_name, z_name]
        else:
            region_name = rng.choice(sorted(DISTRICTS))
            spatial = f"We are staying in {region_name.title()}."
            reference = regions[region_name]
            eps = None
            refs = [region_name]
        question = f"{spatial} {want}" if rng.random() < 0.5 else f"{want} {spatial}"

        def inside(g: geo.Geometry) -> bool:
            if eps is None:
                return geo.contains(reference, g)
            return geo.within_buffer(g, reference, eps)

        def sample(pred, lo=-HALF_SIZE_KM - 1.0, hi=HALF_SIZE_KM + 1.0) -> geo.Coord:
            while True:
                c = b.at(rng.uniform(lo, hi), rng.uniform(lo, hi))
                if pred(geo.Point(*c)):
                    return c

        def dist(c: geo.Coord) -> float:
            p = geo.Point(*c)
            return 0.0 if geo.intersects(reference, p) else geo.distance(reference, p)

        if eps is None:
            target = sample(lambda p: inside(p) and geo.distance(p, geo.Polyline(reference.outer)) > 0.2)
        else:
            target = sample(lambda p: inside(p) and 0.45 * eps < dist(p.coord) < 0.9 * eps)
        b.add(f"Kitchen {qid.upper()}", "restaurant", target, [want, serves])
        tid = len(b.features) - 1

        # closer to the reference than the target, but without the dish
        if eps is None:
            nearer = sample(lambda p: inside(p))
        else:
            d_t = dist(target)
            nearer = sample(lambda p: dist(p.coord) < 0.5 * d_t, -HALF_SIZE_KM, HALF_SIZE_KM)
        b.add(f"Diner {qid.upper()}", "restaurant", nearer, b.filler_reviews("restaurant"))
        nid = len(b.features) - 1

        # decoys: same dish and the full question text, but far outside the city
        decoy_ids = []
        for j in range(2):
            bearing = rng.uniform(0, 2 * math.pi)
            r = rng.uniform(*DECOY_RING_KM)
            far = b.at(r * math.cos(bearing), r * math.sin(bearing))
            b.add(f"Bistro {qid.upper()}{'ab'[j]}", "restaurant", far, [question, serves])
            decoy_ids.append(len(b.features) - 1)
        qa.append({"qid": qid, "question": question, "references": refs, "_target": tid,
                   "_decoys": decoy_ids, "_nearer": nid, "kind": kind})

    # background POIs up to n_pois
    cats, weights = zip(*_CATEGORY_MIX)
    counter = 0
    while len(b.features) < n_pois:
        cat = rng.choices(cats, weights)[0]
        counter += 1
        b.add(f"{cat.title()} {counter:04d}", cat, b.at(*b.on_street()), b.filler_reviews(cat))

    # shuffle so ids carry no information about planting, then assign ids
    order = list(range(len(b.features)))
    rng.shuffle(order)
    new_id = {old: f"poi{pos:05d}" for pos, old in enumerate(order)}
    feats = [None] * len(order)
    for old, f in enumerate(b.features):
        f["properties"]["id"] = new_id[old]
        feats[int(new_id[old][3:])] = f
    for q in qa:
        planted[q["qid"]] = {
            "target": new_id[q.pop("_target")],
            "decoys": [new_id[d] for d in q.pop("_decoys")],
            "nearer": new_id[q.pop("_nearer")],
            "kind": q.pop("kind"),
        }
        q["relevant_ids"] = [planted[q["qid"]]["target"]]
    return SyntheticCity({"type": "FeatureCollection", "features": feats}, gaz, qa, seed, planted)


def build_corpus(city: SyntheticCity, embedder=None, masker=None):
    """Ingest a generated city in memory."""
    from .corpus import Gazetteer, build_corpus as _build
    from .embedding import HashEmbedder, LexiconMasker

    gazetteer = Gazetteer.from_geojson(city.gazetteer)
    return _build(city.pois, gazetteer, embedder or HashEmbedder(), masker or LexiconMasker())


def random_point_corpus(n: int, seed: Optional[int] = None, spread_km: float = 8.0) -> dict:
    """Plain random POIs around the city center, for index and retrieval checks."""
    rng = random.Random(seed)
    cats = [c for c, _ in _CATEGORY_MIX]
    feats = []
    for i in range(n):
        c = geo.offset(CENTER, rng.uniform(-spread_km, spread_km), rng.uniform(-spread_km, spread_km))
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [c.lon, c.lat]},
            "properties": {"id": f"r{i:05d}", "name": f"Place {i}", "category": rng.choice(cats), "reviews": []},
        })
    return {"type": "FeatureCollection", "features": feats}
