#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajgraph/date_normalizer.hpp"
#include "trajgraph/extraction.hpp"
#include "trajgraph/visit_graph.hpp"

namespace trajgraph::ingest {

// mention_id -> concept id; mentions without a link are simply absent.
using ConceptLinks = std::map<std::string, std::string>;

// Document creation time used to resolve relative time expressions: the
// note's visit date when present, otherwise the DCT mention's own text if it
// parses as an absolute date.
std::optional<Date> resolve_dct(const NoteExtraction& note, DateLocale locale);

// Merges mentions into graph nodes: mentions sharing a linked concept become
// one Entity node, Date mentions normalizing to the same calendar date become
// one Timex node, everything else is a singleton. Every mention ends up in
// exactly one node. Throws InputError when links reference unknown mentions.
std::vector<GraphNode> cluster_mentions(const NoteExtraction& note, const ConceptLinks& links,
                                        DateLocale locale = DateLocale::US);

struct RejectedEdge {
    std::string source;  // node ids after lifting
    std::string target;
    TemporalRelation relation = TemporalRelation::Before;
    double confidence = 0.0;
    std::string reason;
};

struct TimegraphResult {
    std::vector<GraphEdge> edges;  // Before directed, Overlap symmetric pairs
    std::vector<RejectedEdge> rejected;
};

// Greedy confidence-ordered temporal reduction. Candidates are lifted to node
// level, After edges flipped to Before, then inserted most-confident-first
// (ties keep input order); an edge is kept only if the Before partial order
// over Overlap-merged components stays consistent. Self-relations produced by
// mention merging are dropped silently.
TimegraphResult reduce_timegraph(const std::vector<TemporalRelationCandidate>& candidates,
                                 const std::map<std::string, std::string>& mention_to_node);

// Convenience: links -> clustering -> reduction for one note.
VisitGraph build_visit_graph(const NoteExtraction& note, const ConceptLinks& links,
                             int visit_index, DateLocale locale = DateLocale::US,
                             std::vector<RejectedEdge>* rejected_out = nullptr);

// Orders notes for trajectory assembly: by (visit_date, note_id) when every
// note carries a date, otherwise file sequence is kept as-is (de-identified
// corpora have no usable anchor).
std::vector<NoteExtraction> sort_notes_by_visit(std::vector<NoteExtraction> notes);

// Keeps the last max_notes notes of an ordered record. Throws InputError on
// an empty record.
std::vector<NoteExtraction> truncate_visits(std::vector<NoteExtraction> notes,
                                            std::size_t max_notes = 5);

}  // namespace trajgraph::ingest
