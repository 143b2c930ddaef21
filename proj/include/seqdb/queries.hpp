#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seqdb/core.hpp"
#include "seqdb/parexec.hpp"

namespace seqdb::queries {

/// One row of the unique-read binning result: ranked tags with their
/// observed frequencies, ordered by (frequency desc, sequence asc).
struct BinnedTagRow {
    std::uint32_t rank = 0;
    std::uint32_t frequency = 0;
    Sequence seq;

    bool operator==(const BinnedTagRow& o) const {
        return rank == o.rank && frequency == o.frequency && seq == o.seq;
    }
};

struct ExpressionRow {
    SurrogateId gene_id = 0;
    SampleKey sample;
    std::uint64_t total_frequency = 0;
    std::uint32_t tag_count = 0;

    bool operator==(const ExpressionRow& o) const {
        return gene_id == o.gene_id && sample == o.sample &&
               total_frequency == o.total_frequency && tag_count == o.tag_count;
    }
};

/// Total order of the binning result: frequency descending, then sequence
/// ascending lexicographic. The tie-break makes ranks deterministic across
/// runs and partition counts.
inline bool binned_row_order(const std::pair<std::string, std::uint64_t>& a,
                             const std::pair<std::string, std::uint64_t>& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
}

/// Sorts grouped counts under the total order and assigns dense ranks from 1.
inline std::vector<BinnedTagRow> rank_rows(
    std::vector<std::pair<std::string, std::uint64_t>> counts) {
    std::sort(counts.begin(), counts.end(), binned_row_order);
    std::vector<BinnedTagRow> out;
    out.reserve(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        out.push_back({static_cast<std::uint32_t>(i + 1),
                       static_cast<std::uint32_t>(counts[i].second),
                       Sequence(std::move(counts[i].first))});
    return out;
}

/// Aggregate contract for unique-read binning: filters to one sample,
/// drops uncertain sequences (any containing N), counts by exact sequence.
/// merge sums the hash maps, so it is associative and commutative.
struct BinUniqueReadsContract {
    using State = std::unordered_map<std::string, std::uint64_t>;

    SampleKey sample;

    State init() const { return {}; }

    void accumulate(State& s, const ShortRead& read) const {
        if (read.sample != sample) return;
        if (contains_n(read.seq)) return;
        ++s[read.seq.str()];
    }

    void merge(State& into, State&& other) const {
        for (auto& [seq, count] : other) into[seq] += count;
    }

    std::vector<BinnedTagRow> terminate(State&& s) const {
        std::vector<std::pair<std::string, std::uint64_t>> counts;
        counts.reserve(s.size());
        for (auto& [seq, count] : s) counts.emplace_back(seq, count);
        return rank_rows(std::move(counts));
    }
};

/// Unique-read binning over one sample, ignoring all uncertain sequences.
inline std::vector<BinnedTagRow> bin_unique_reads(std::span<const ShortRead> reads,
                                                  const SampleKey& sample,
                                                  std::size_t workers = 1) {
    BinUniqueReadsContract contract{sample};
    return parexec::run_parallel(reads, contract,
                                 parexec::PartitionPlan<ShortRead>::blocks(workers));
}

/// Materializes binned rows as Tag entities with sequential ids in rank
/// order, so tag ids are reproducible for a given sample content.
inline std::vector<Tag> tags_from_binning(std::span<const BinnedTagRow> rows,
                                          const SampleKey& sample,
                                          SurrogateId first_tag_id = 1) {
    std::vector<Tag> tags;
    tags.reserve(rows.size());
    for (const auto& r : rows)
        tags.push_back(Tag{first_tag_id + (r.rank - 1), sample, r.seq, r.frequency, r.rank});
    return tags;
}

/// Aggregate contract for digital gene expression: per gene, sums the
/// frequencies of the tags aligned to it and counts the alignment rows.
/// A tag aligned to the same gene more than once counts each alignment,
/// matching join-then-group semantics.
struct GeneExpressionContract {
    struct Totals {
        std::uint64_t frequency_sum = 0;
        std::uint32_t alignment_count = 0;
    };
    using State = std::unordered_map<SurrogateId, Totals>;

    SampleKey sample;
    const std::unordered_map<SurrogateId, std::uint32_t>* tag_frequency;  // tag_id -> frequency

    State init() const { return {}; }

    void accumulate(State& s, const Alignment& a) const {
        if (a.sample != sample) return;
        const auto it = tag_frequency->find(a.subject_id);
        if (it == tag_frequency->end())
            throw DataError("alignment " + std::to_string(a.alignment_id) +
                            " references unknown tag " + std::to_string(a.subject_id));
        auto& t = s[a.gene_id];
        t.frequency_sum += it->second;
        t.alignment_count += 1;
    }

    void merge(State& into, State&& other) const {
        for (auto& [gene, t] : other) {
            auto& dst = into[gene];
            dst.frequency_sum += t.frequency_sum;
            dst.alignment_count += t.alignment_count;
        }
    }

    std::vector<ExpressionRow> terminate(State&& s) const {
        std::vector<ExpressionRow> out;
        out.reserve(s.size());
        for (auto& [gene, t] : s)
            out.push_back({gene, sample, t.frequency_sum, t.alignment_count});
        std::sort(out.begin(), out.end(),
                  [](const ExpressionRow& a, const ExpressionRow& b) { return a.gene_id < b.gene_id; });
        return out;
    }
};

/// Digital gene expression for one sample: per gene, total frequency of
/// aligned tags and the count of contributing alignments. Rows are ordered
/// by gene id. A dangling tag reference is a referential error naming the
/// alignment.
inline std::vector<ExpressionRow> gene_expression(std::span<const Alignment> alignments,
                                                  std::span<const Tag> tags,
                                                  const SampleKey& sample,
                                                  std::size_t workers = 1) {
    std::unordered_map<SurrogateId, std::uint32_t> freq;
    freq.reserve(tags.size());
    for (const auto& t : tags)
        if (t.sample == sample) freq.emplace(t.tag_id, t.frequency);
    GeneExpressionContract contract{sample, &freq};
    return parexec::run_parallel(alignments, contract,
                                 parexec::PartitionPlan<Alignment>::blocks(workers));
}

// ---------------------------------------------------------------------------
// TSV serialization (LF line endings, header row)
// ---------------------------------------------------------------------------

inline std::string binned_rows_to_tsv(std::span<const BinnedTagRow> rows) {
    std::string out = "rank\tfrequency\tsequence\n";
    for (const auto& r : rows) {
        out += std::to_string(r.rank);
        out += '\t';
        out += std::to_string(r.frequency);
        out += '\t';
        out += r.seq.str();
        out += '\n';
    }
    return out;
}

inline std::string expression_rows_to_tsv(std::span<const ExpressionRow> rows) {
    std::string out = "gene_id\ttotal_frequency\ttag_count\n";
    for (const auto& r : rows) {
        out += std::to_string(r.gene_id);
        out += '\t';
        out += std::to_string(r.total_frequency);
        out += '\t';
        out += std::to_string(r.tag_count);
        out += '\n';
    }
    return out;
}

}  // namespace seqdb::queries
