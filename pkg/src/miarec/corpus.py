"""Corpus ingestion, scholar/paper indexing, citation masses, the
leave-one-out train/test split, and a synthetic corpus generator for
desk-scale experiments.

Input format: UTF-8 JSON lines, one paper per line with keys ``id``,
``title``, ``abstract`` (optional), ``year``, ``venue``, ``keywords``,
``authors`` (objects with ``id`` and optional ``org``) and ``references``.
Unknown keys are ignored. Self-references are dropped at parse time and
reference lists are de-duplicated preserving order.
"""

import json
import random
from dataclasses import dataclass, field

from .errors import (
    CorpusParseError,
    DuplicateIdError,
    EmptySplitError,
    InsufficientCandidatesError,
)
from .validation import check_positive, check_probability


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    title: str
    year: int
    venue: str
    keywords: tuple
    author_ids: tuple
    references: tuple
    abstract: str = None
    author_orgs: tuple = ()  # aligned with author_ids; None where unknown


@dataclass
class CorpusStore:
    papers: dict = field(default_factory=dict)  # paper_id -> PaperRecord
    scholars: dict = field(default_factory=dict)  # scholar_id -> [paper_id] in insertion order
    citation_mass: dict = field(default_factory=dict)  # scholar_id -> in-corpus citations received
    scholar_orgs: dict = field(default_factory=dict)  # scholar_id -> frozenset of orgs

    @property
    def n_papers(self):
        return len(self.papers)

    @property
    def n_scholars(self):
        return len(self.scholars)

    def in_corpus_references(self, paper_id):
        return [r for r in self.papers[paper_id].references if r in self.papers]


@dataclass
class SplitSpec:
    train_positives: dict  # scholar_id -> set of paper_ids
    test_positives: dict  # scholar_id -> set of paper_ids
    test_negatives: dict  # scholar_id -> list of paper_ids (3x positives)

    @property
    def scholars(self):
        return sorted(self.test_positives)


def _expect(condition, message, line_number):
    if not condition:
        raise CorpusParseError(message, line_number)


def _parse_record(obj, line_number):
    _expect(isinstance(obj, dict), "record is not a JSON object", line_number)
    _expect("id" in obj, 'missing "id" field', line_number)
    pid = obj["id"]
    _expect(isinstance(pid, str) and pid, '"id" must be a non-empty string', line_number)
    title = obj.get("title")
    _expect(isinstance(title, str), '"title" must be a string', line_number)
    year = obj.get("year")
    _expect(isinstance(year, int) and not isinstance(year, bool), '"year" must be an integer', line_number)
    venue = obj.get("venue")
    _expect(isinstance(venue, str), '"venue" must be a string', line_number)
    abstract = obj.get("abstract")
    _expect(abstract is None or isinstance(abstract, str), '"abstract" must be a string', line_number)
    keywords = obj.get("keywords", [])
    _expect(
        isinstance(keywords, list) and all(isinstance(k, str) for k in keywords),
        '"keywords" must be an array of strings',
        line_number,
    )
    authors = obj.get("authors")
    _expect(isinstance(authors, list) and authors, '"authors" must be a non-empty array', line_number)
    author_ids, author_orgs, seen = [], [], set()
    for a in authors:
        _expect(isinstance(a, dict) and isinstance(a.get("id"), str) and a["id"], "author entries need a non-empty id", line_number)
        if a["id"] in seen:
            continue
        seen.add(a["id"])
        author_ids.append(a["id"])
        org = a.get("org")
        _expect(org is None or isinstance(org, str), "author org must be a string", line_number)
        author_orgs.append(org)
    references = obj.get("references", [])
    _expect(
        isinstance(references, list) and all(isinstance(r, str) for r in references),
        '"references" must be an array of strings',
        line_number,
    )
    deduped = []
    for r in references:
        if r != pid and r not in deduped:
            deduped.append(r)
    return PaperRecord(
        paper_id=pid,
        title=title,
        year=year,
        venue=venue,
        keywords=tuple(keywords),
        author_ids=tuple(author_ids),
        references=tuple(deduped),
        abstract=abstract,
        author_orgs=tuple(author_orgs),
    )


def parse_jsonl(line_stream):
    """Parse an iterable of JSONL strings into a fully indexed CorpusStore."""
    corpus = CorpusStore()
    for line_number, line in enumerate(line_stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusParseError(f"invalid JSON ({exc.msg})", line_number) from exc
        record = _parse_record(obj, line_number)
        if record.paper_id in corpus.papers:
            raise DuplicateIdError(f"duplicate paper id {record.paper_id!r} at line {line_number}")
        corpus.papers[record.paper_id] = record
        for sid, org in zip(record.author_ids, record.author_orgs):
            corpus.scholars.setdefault(sid, []).append(record.paper_id)
            corpus.citation_mass.setdefault(sid, 0)
            orgs = corpus.scholar_orgs.setdefault(sid, set())
            if org is not None:
                orgs.add(org)
    _recompute_citation_mass(corpus)
    return corpus


def _recompute_citation_mass(corpus):
    for sid in corpus.scholars:
        corpus.citation_mass[sid] = 0
    for record in corpus.papers.values():
        for ref in record.references:
            cited = corpus.papers.get(ref)
            if cited is None:
                continue  # out-of-corpus references carry no mass
            for author in cited.author_ids:
                corpus.citation_mass[author] += 1


def parse_file(path):
    with open(path, "r", encoding="utf-8") as handle:
        return parse_jsonl(handle)


def serialize_jsonl(corpus):
    """Inverse of parse_jsonl; papers emitted in insertion order."""
    lines = []
    for record in corpus.papers.values():
        authors = []
        for sid, org in zip(record.author_ids, record.author_orgs):
            entry = {"id": sid, "name": sid}
            if org is not None:
                entry["org"] = org
            authors.append(entry)
        obj = {
            "id": record.paper_id,
            "title": record.title,
            "year": record.year,
            "venue": record.venue,
            "keywords": list(record.keywords),
            "authors": authors,
            "references": list(record.references),
        }
        if record.abstract is not None:
            obj["abstract"] = record.abstract
        lines.append(json.dumps(obj, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def write_file(corpus, path):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_jsonl(corpus))


def leave_one_out_split(corpus, neg_seed):
    """Leave-one-out split over reference-bearing scholars.

    Positives of a scholar are the in-corpus references of their papers. The
    references of the latest paper (max year, ties broken by greatest
    paper_id) become test positives; the remaining references train. A paper
    cited by both the latest and older papers goes to test only. Negatives
    are 3x the test positives, sampled uniformly without replacement from
    papers outside the scholar's positives.
    """
    rng = random.Random(neg_seed)
    all_papers = sorted(corpus.papers)
    train_positives, test_positives, test_negatives = {}, {}, {}
    for sid in sorted(corpus.scholars):
        bearing = [
            corpus.papers[pid]
            for pid in corpus.scholars[sid]
            if corpus.in_corpus_references(pid)
        ]
        if len(bearing) < 2:
            continue  # not enough history for a held-out paper
        latest = max(bearing, key=lambda rec: (rec.year, rec.paper_id))
        test_pos = set(corpus.in_corpus_references(latest.paper_id))
        train_pos = set()
        for rec in bearing:
            if rec.paper_id == latest.paper_id:
                continue
            train_pos.update(corpus.in_corpus_references(rec.paper_id))
        train_pos -= test_pos
        positives = test_pos | train_pos
        candidates = [p for p in all_papers if p not in positives]
        need = 3 * len(test_pos)
        if len(candidates) < need:
            raise InsufficientCandidatesError(
                f"scholar {sid!r} needs {need} negatives but only {len(candidates)} papers are available"
            )
        test_negatives[sid] = rng.sample(candidates, need)
        train_positives[sid] = train_pos
        test_positives[sid] = test_pos
    if not test_positives:
        raise EmptySplitError("no scholar has two or more reference-bearing papers")
    return SplitSpec(train_positives, test_positives, test_negatives)


# Synthetic corpus knobs. Communities get disjoint keyword/venue/org pools so
# relation graphs concentrate inside communities. Each community splits into
# subtopics: a scholar works in one subtopic, their papers' text uses that
# subtopic's keywords, and collaborators, venues and citations all prefer the
# same subtopic without being confined to it. Neighborhoods therefore mix
# same-subtopic and other-community members while interaction counts (shared
# papers/venues) concentrate on same-subtopic pairs, and paper text genuinely
# predicts held-out citations. A few "hub" scholars per community co-author
# and get cited at higher weight, skewing citation masses the way real
# citation data does.
_SUBTOPICS_PER_COMMUNITY = 3
_KEYWORDS_PER_SUBTOPIC = 6
_KEYWORDS_PER_PAPER = 2
_VENUES_PER_COMMUNITY = 6
_HOME_VENUE_PROB = 0.9
_SUBTOPIC_VENUE_PROB = 0.7
_CROSS_SUBTOPIC_COAUTHOR_WEIGHT = 0.15
_ORGS_PER_COMMUNITY = 2
_REFS_PER_PAPER = 5
_SUBTOPIC_ABSTRACT_TOKENS = 16
_COMMUNITY_ABSTRACT_TOKENS = 4
_FILLER = ("study", "method", "results", "analysis", "evaluation")
_BASE_YEAR = 2000
_HUB_WEIGHT = 2.0
_SAME_SUBTOPIC_WEIGHT = 3.0


def synthetic_scholar_id(community, index):
    return f"c{community}s{index:03d}"


def synthetic_paper_id(community, counter):
    return f"c{community}p{counter:05d}"


def community_of(entity_id):
    """Recover the community index embedded in a synthetic id."""
    digits = ""
    for ch in entity_id[1:]:
        if ch.isdigit():
            digits += ch
        else:
            break
    return int(digits)


def generate_synthetic(n_communities, scholars_per, papers_per_scholar, intra_cite_prob, seed):
    """Deterministic planted-community corpus.

    Scholars are partitioned into communities; every paper draws each of its
    references from its own community with probability ``intra_cite_prob``
    and from the rest of the corpus otherwise.
    """
    check_positive("n_communities", n_communities)
    check_positive("scholars_per", scholars_per)
    check_positive("papers_per_scholar", papers_per_scholar)
    check_probability("intra_cite_prob", intra_cite_prob)
    rng = random.Random(seed)

    communities = list(range(n_communities))
    scholars = {c: [synthetic_scholar_id(c, i) for i in range(scholars_per)] for c in communities}
    subtopic_pool = {
        (c, t): [f"kw{c}s{t}w{w}" for w in range(_KEYWORDS_PER_SUBTOPIC)]
        for c in communities
        for t in range(_SUBTOPICS_PER_COMMUNITY)
    }
    community_pool = {
        c: [kw for t in range(_SUBTOPICS_PER_COMMUNITY) for kw in subtopic_pool[(c, t)]]
        for c in communities
    }
    venue_pool = {c: [f"venue{c}v{v}" for v in range(_VENUES_PER_COMMUNITY)] for c in communities}
    org_pool = {c: [f"org{c}g{g}" for g in range(_ORGS_PER_COMMUNITY)] for c in communities}
    scholar_org = {
        sid: org_pool[c][i % _ORGS_PER_COMMUNITY]
        for c in communities
        for i, sid in enumerate(scholars[c])
    }
    scholar_subtopic = {
        sid: i % _SUBTOPICS_PER_COMMUNITY
        for c in communities
        for i, sid in enumerate(scholars[c])
    }
    # home venue tracks the subtopic for most scholars, so shared-venue counts
    # carry subtopic information without making venue groups pure
    scholar_home_venue = {}
    for c in communities:
        for sid in scholars[c]:
            if rng.random() < _SUBTOPIC_VENUE_PROB:
                pair = venue_pool[c][2 * scholar_subtopic[sid] : 2 * scholar_subtopic[sid] + 2]
                scholar_home_venue[sid] = rng.choice(pair)
            else:
                scholar_home_venue[sid] = rng.choice(venue_pool[c])
    n_hubs = max(1, scholars_per // 5)
    hub_ids = {sid for c in communities for sid in scholars[c][:n_hubs]}

    # First pass lays out every paper so references can point anywhere.
    plan = []
    counter = 0
    for c in communities:
        for i, owner in enumerate(scholars[c]):
            for j in range(papers_per_scholar):
                plan.append((synthetic_paper_id(c, counter), c, owner, j))
                counter += 1
    by_community = {c: [pid for pid, pc, _, _ in plan if pc == c] for c in communities}
    all_ids = [pid for pid, _, _, _ in plan]
    owner_of = {pid: owner for pid, _, owner, _ in plan}

    def cite_weight(pid, subtopic):
        w = _HUB_WEIGHT if owner_of[pid] in hub_ids else 1.0
        if scholar_subtopic[owner_of[pid]] == subtopic:
            w *= _SAME_SUBTOPIC_WEIGHT
        return w

    records = []
    for pid, c, owner, j in plan:
        subtopic = scholar_subtopic[owner]
        coauthor_pool = [s for s in scholars[c] if s != owner]
        n_coauthors = min(len(coauthor_pool), rng.randint(1, 2))
        weights = [
            (_HUB_WEIGHT if s in hub_ids else 1.0)
            * (1.0 if scholar_subtopic[s] == subtopic else _CROSS_SUBTOPIC_COAUTHOR_WEIGHT)
            for s in coauthor_pool
        ]
        coauthors = []
        while len(coauthors) < n_coauthors:
            pick = rng.choices(coauthor_pool, weights=weights, k=1)[0]
            if pick not in coauthors:
                coauthors.append(pick)
        authors = [owner] + coauthors

        refs = []
        intra_pool = [p for p in by_community[c] if p != pid]
        outside_pool = [p for p in all_ids if p not in by_community[c]] if n_communities > 1 else []
        for _ in range(_REFS_PER_PAPER):
            intra = rng.random() < intra_cite_prob
            pool = intra_pool if intra else outside_pool
            if not pool:
                pool = outside_pool or intra_pool
            if not pool:
                break
            pool_weights = [cite_weight(p, subtopic) for p in pool]
            for _attempt in range(50):
                pick = rng.choices(pool, weights=pool_weights, k=1)[0]
                if pick not in refs:
                    refs.append(pick)
                    break

        keywords = rng.sample(subtopic_pool[(c, subtopic)], _KEYWORDS_PER_PAPER)
        if rng.random() < _HOME_VENUE_PROB:
            venue = scholar_home_venue[owner]
        else:
            venue = rng.choice(venue_pool[c])
        title = " ".join(["on"] + rng.sample(subtopic_pool[(c, subtopic)], 2))
        # Abstracts name the work they build on (paper ids as proxy tokens for
        # distinctive method names), so text correlates with citation structure.
        abstract_tokens = (
            rng.choices(subtopic_pool[(c, subtopic)], k=_SUBTOPIC_ABSTRACT_TOKENS)
            + rng.choices(community_pool[c], k=_COMMUNITY_ABSTRACT_TOKENS)
            + rng.choices(_FILLER, k=3)
            + [pid, pid]
            + refs
        )
        records.append(
            {
                "id": pid,
                "title": title,
                "abstract": " ".join(abstract_tokens),
                "year": _BASE_YEAR + j,
                "venue": venue,
                "keywords": keywords,
                "authors": [
                    {"id": sid, "name": f"Scholar {sid}", "org": scholar_org[sid]}
                    for sid in authors
                ],
                "references": refs,
            }
        )
    return parse_jsonl(json.dumps(rec, sort_keys=True) for rec in records)
