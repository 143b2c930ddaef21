#pragma once

#include <algorithm>
#include <array>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seqdb/core.hpp"
#include "seqdb/parexec.hpp"

namespace seqdb::consensus {

/// One aligned base: the atom the pivot path groups by (ref, pos).
struct PivotedBase {
    SurrogateId ref_id = 0;
    std::uint64_t pos = 0;  // 1-based reference position
    char base = 'N';
    std::uint8_t qual = 0;
};

/// All aligned bases covering one reference position.
struct PileupColumn {
    SurrogateId ref_id = 0;
    std::uint64_t pos = 0;
    std::vector<std::pair<char, std::uint8_t>> entries;
};

/// An alignment joined with its read's sequence and qualities. Placements
/// are gapless: the i-th base lands at pos + i.
struct AlignedRead {
    Alignment alignment;
    Sequence seq;
    QualityVector qual;
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

/// Transforms one aligned read into its per-position base/quality tuples.
/// Reverse-strand reads come out already complemented and in ascending
/// coordinate order, with the quality order reversed to match.
inline std::vector<PivotedBase> pivot_alignment(const AlignedRead& ar, std::uint64_t ref_length) {
    const std::uint64_t pos = ar.alignment.pos;
    const std::size_t len = ar.seq.length();
    if (ar.seq.length() != ar.qual.length())
        throw DataError("aligned read " + std::to_string(ar.alignment.alignment_id) +
                        ": sequence and quality lengths differ");
    if (pos < 1 || (len > 0 && pos + len - 1 > ref_length))
        throw DataError("alignment " + std::to_string(ar.alignment.alignment_id) +
                        " out of reference bounds");
    std::vector<PivotedBase> out;
    out.reserve(len);
    const bool reverse = ar.alignment.strand == Strand::reverse;
    for (std::size_t i = 0; i < len; ++i) {
        const std::size_t src = reverse ? len - 1 - i : i;
        const char base = reverse ? complement_base(ar.seq[src]) : ar.seq[src];
        out.push_back({ar.alignment.gene_id, pos + i, base, ar.qual[src]});
    }
    return out;
}

namespace detail {

using ColumnScores = std::array<std::uint64_t, 4>;

// Quality-weighted vote: each entry adds qual+1 to its base's score; N
// entries add nothing. Highest score wins, ties resolved alphabetically,
// zero coverage calls N.
inline char call_from_scores(const ColumnScores& scores) {
    std::uint64_t best = 0;
    int best_code = -1;
    for (int code = 0; code < 4; ++code) {
        if (scores[code] > best) {
            best = scores[code];
            best_code = code;
        }
    }
    return best_code < 0 ? 'N' : base_from_code(static_cast<unsigned>(best_code));
}

}  // namespace detail

/// Aggregates one pileup column to the consensus base.
inline char call_base(const PileupColumn& column) {
    detail::ColumnScores scores{};
    for (const auto& [base, qual] : column.entries) {
        const unsigned code = base_code(base);
        if (code < 4) scores[code] += static_cast<std::uint64_t>(qual) + 1;
    }
    return detail::call_from_scores(scores);
}

/// Builds a consensus string incrementally: called bases arrive in strictly
/// increasing position order, gaps fill with N, and the result grows in a
/// single buffer so chromosome-scale output never needs a second copy.
class ConsensusAssembler {
public:
    ConsensusAssembler(std::uint64_t first_pos, std::uint64_t length)
        : first_pos_(first_pos), next_pos_(first_pos), end_pos_(first_pos + length) {
        out_.reserve(static_cast<std::size_t>(length));
    }

    void append(std::uint64_t pos, char base) {
        if (pos < next_pos_)
            throw DataError("consensus positions must be strictly increasing");
        if (pos >= end_pos_)
            throw DataError("consensus position beyond reference end");
        out_.append(static_cast<std::size_t>(pos - next_pos_), 'N');
        out_.push_back(base);
        next_pos_ = pos + 1;
    }

    Sequence finish() {
        out_.append(static_cast<std::size_t>(end_pos_ - next_pos_), 'N');
        next_pos_ = end_pos_;
        return Sequence(std::move(out_));
    }

    std::uint64_t first_pos() const noexcept { return first_pos_; }

private:
    std::string out_;
    std::uint64_t first_pos_;
    std::uint64_t next_pos_;
    std::uint64_t end_pos_;
};

/// Concatenates called bases into the full-length consensus; positions
/// absent from the stream come out as N.
inline Sequence assemble_sequence(std::span<const std::pair<std::uint64_t, char>> called,
                                  std::uint64_t ref_length) {
    ConsensusAssembler assembler(1, ref_length);
    for (const auto& [pos, base] : called) assembler.append(pos, base);
    return assembler.finish();
}

// ---------------------------------------------------------------------------
// Whole-set consensus, pivot path
// ---------------------------------------------------------------------------

namespace detail {

struct RefInfo {
    SurrogateId ref_id;
    std::uint64_t length;
};

inline std::vector<RefInfo> sorted_ref_infos(std::span<const ReferenceSequence> refs) {
    std::vector<RefInfo> infos;
    infos.reserve(refs.size());
    for (const auto& r : refs) infos.push_back({r.ref_id, r.seq.length()});
    std::sort(infos.begin(), infos.end(),
              [](const RefInfo& a, const RefInfo& b) { return a.ref_id < b.ref_id; });
    return infos;
}

inline std::uint64_t ref_length_or_throw(const std::vector<RefInfo>& infos, SurrogateId ref_id) {
    const auto it = std::lower_bound(infos.begin(), infos.end(), ref_id,
                                     [](const RefInfo& r, SurrogateId id) { return r.ref_id < id; });
    if (it == infos.end() || it->ref_id != ref_id)
        throw DataError("alignment references unknown reference " + std::to_string(ref_id));
    return it->length;
}

}  // namespace detail

/// The conceptually clean path: pivot every alignment into individual
/// bases, group them by (reference, position), call each group, assemble.
/// Materializes the whole intermediate result; serves as the oracle the
/// sliding path must match exactly.
inline std::vector<ConsensusSequence> consensus_pivot(std::span<const AlignedRead> alignments,
                                                      std::span<const ReferenceSequence> refs) {
    const auto infos = detail::sorted_ref_infos(refs);
    std::unordered_map<SurrogateId, std::map<std::uint64_t, detail::ColumnScores>> grouped;
    for (const auto& ar : alignments) {
        const std::uint64_t ref_len = detail::ref_length_or_throw(infos, ar.alignment.gene_id);
        for (const auto& pb : pivot_alignment(ar, ref_len)) {
            const unsigned code = base_code(pb.base);
            if (code < 4)
                grouped[pb.ref_id][pb.pos][code] += static_cast<std::uint64_t>(pb.qual) + 1;
            else
                grouped[pb.ref_id][pb.pos];  // N still materializes the column
        }
    }
    std::vector<ConsensusSequence> out;
    out.reserve(infos.size());
    for (const auto& info : infos) {
        ConsensusAssembler assembler(1, info.length);
        const auto it = grouped.find(info.ref_id);
        if (it != grouped.end())
            for (const auto& [pos, scores] : it->second)
                assembler.append(pos, detail::call_from_scores(scores));
        out.push_back({info.ref_id, assembler.finish()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Whole-set consensus, order-scanning sliding window
// ---------------------------------------------------------------------------

namespace detail {

// Active columns of the scan. A column is finalized once the scan position
// passes it: alignments arrive sorted by start, so nothing later can touch
// it. Peak size is bounded by the longest read span, never by the
// reference length.
class ColumnWindow {
public:
    bool empty() const noexcept { return cols_.empty(); }

    void cover(std::uint64_t begin, std::uint64_t end) {
        if (cols_.empty()) base_pos_ = begin;
        while (base_pos_ + cols_.size() < end) cols_.push_back(ColumnScores{});
    }

    void accumulate(std::uint64_t pos, char base, std::uint8_t qual) {
        const unsigned code = base_code(base);
        if (code < 4) cols_[static_cast<std::size_t>(pos - base_pos_)][code] += std::uint64_t(qual) + 1;
    }

    template <typename Emit>
    void finalize_before(std::uint64_t pos, Emit&& emit) {
        while (!cols_.empty() && base_pos_ < pos) {
            emit(base_pos_, call_from_scores(cols_.front()));
            cols_.pop_front();
            ++base_pos_;
        }
    }

    template <typename Emit>
    void finalize_all(Emit&& emit) {
        while (!cols_.empty()) {
            emit(base_pos_, call_from_scores(cols_.front()));
            cols_.pop_front();
            ++base_pos_;
        }
    }

    std::size_t size() const noexcept { return cols_.size(); }

private:
    std::deque<ColumnScores> cols_;
    std::uint64_t base_pos_ = 0;
};

// Single in-order pass over one reference's alignments, emitting calls for
// positions inside [emit_begin, emit_end) only.
template <typename Iter>
inline void slide_ref(Iter first, Iter last, std::uint64_t ref_len, std::uint64_t emit_begin,
                      std::uint64_t emit_end, ConsensusAssembler& assembler) {
    ColumnWindow window;
    std::uint64_t prev_pos = 0;
    const auto emit = [&](std::uint64_t pos, char base) {
        if (pos >= emit_begin && pos < emit_end) assembler.append(pos, base);
    };
    for (Iter it = first; it != last; ++it) {
        const AlignedRead& ar = *it;
        const std::uint64_t pos = ar.alignment.pos;
        const std::size_t len = ar.seq.length();
        if (pos < prev_pos)
            throw DataError("alignments not sorted by position (saw " + std::to_string(pos) +
                            " after " + std::to_string(prev_pos) + ")");
        prev_pos = pos;
        if (ar.seq.length() != ar.qual.length())
            throw DataError("aligned read " + std::to_string(ar.alignment.alignment_id) +
                            ": sequence and quality lengths differ");
        if (pos < 1 || (len > 0 && pos + len - 1 > ref_len))
            throw DataError("alignment " + std::to_string(ar.alignment.alignment_id) +
                            " out of reference bounds");
        if (len == 0) continue;
        window.finalize_before(pos, emit);
        window.cover(pos, pos + len);
        const bool reverse = ar.alignment.strand == Strand::reverse;
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t src = reverse ? len - 1 - i : i;
            const char base = reverse ? complement_base(ar.seq[src]) : ar.seq[src];
            window.accumulate(pos + i, base, ar.qual[src]);
        }
    }
    window.finalize_all(emit);
}

}  // namespace detail

/// Single-pass consensus over alignments sorted by (ref_id, pos) ascending.
/// Matches consensus_pivot exactly while holding only the active window of
/// columns in memory. Unsorted input is rejected.
inline std::vector<ConsensusSequence> consensus_sliding(std::span<const AlignedRead> alignments,
                                                        std::span<const ReferenceSequence> refs) {
    const auto infos = detail::sorted_ref_infos(refs);
    // sorted input groups each reference into one contiguous slice
    std::size_t i = 0;
    std::vector<ConsensusSequence> out;
    out.reserve(infos.size());
    for (const auto& info : infos) {
        const std::size_t begin = i;
        while (i < alignments.size() && alignments[i].alignment.gene_id == info.ref_id) ++i;
        ConsensusAssembler assembler(1, info.length);
        detail::slide_ref(alignments.begin() + static_cast<std::ptrdiff_t>(begin),
                          alignments.begin() + static_cast<std::ptrdiff_t>(i), info.length, 1,
                          info.length + 1, assembler);
        out.push_back({info.ref_id, assembler.finish()});
    }
    if (i < alignments.size())
        throw DataError(i == 0 ? "alignments reference unknown reference " +
                                     std::to_string(alignments[0].alignment.gene_id)
                               : "alignments not sorted by reference id, or reference unknown");
    return out;
}

// ---------------------------------------------------------------------------
// Partitioning for parallel consensus
// ---------------------------------------------------------------------------

/// One contiguous slice of one reference's coordinate space: [begin, end).
struct RefRange {
    SurrogateId ref_id = 0;
    std::uint64_t begin_pos = 1;
    std::uint64_t end_pos = 1;

    bool operator==(const RefRange& o) const {
        return ref_id == o.ref_id && begin_pos == o.begin_pos && end_pos == o.end_pos;
    }
};

/// Output of partition_alignments: per partition, the indexes of the
/// alignments it must consider (sorted, straddlers duplicated into every
/// partition they touch) and the coordinate ranges it owns.
struct AlignmentPartitions {
    std::vector<std::vector<std::size_t>> part_indexes;
    std::vector<std::vector<RefRange>> part_ranges;
};

/// Splits the concatenated reference coordinate space into k contiguous
/// ranges. An alignment overlapping a range boundary is routed to every
/// range it touches; each partition later emits only positions inside its
/// own ranges, so concatenating partition outputs reproduces the
/// unpartitioned consensus bit for bit.
inline AlignmentPartitions partition_alignments(std::span<const AlignedRead> alignments,
                                                std::size_t k,
                                                std::span<const ReferenceSequence> refs) {
    if (k < 1) throw DataError("partition count must be >= 1");
    const auto infos = detail::sorted_ref_infos(refs);

    std::vector<std::uint64_t> ref_offset(infos.size() + 1, 0);
    for (std::size_t r = 0; r < infos.size(); ++r)
        ref_offset[r + 1] = ref_offset[r] + infos[r].length;
    const std::uint64_t total = ref_offset.back();

    std::vector<std::uint64_t> boundary(k + 1);
    for (std::size_t c = 0; c <= k; ++c)
        boundary[c] = total * c / k;

    AlignmentPartitions out;
    out.part_indexes.resize(k);
    out.part_ranges.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        std::uint64_t lo = boundary[c], hi = boundary[c + 1];
        for (std::size_t r = 0; r < infos.size() && lo < hi; ++r) {
            const std::uint64_t ref_lo = ref_offset[r], ref_hi = ref_offset[r + 1];
            if (hi <= ref_lo || lo >= ref_hi) continue;
            const std::uint64_t seg_lo = std::max(lo, ref_lo), seg_hi = std::min(hi, ref_hi);
            out.part_ranges[c].push_back(
                {infos[r].ref_id, seg_lo - ref_lo + 1, seg_hi - ref_lo + 1});
        }
    }

    std::uint64_t prev_global = 0;
    for (std::size_t idx = 0; idx < alignments.size(); ++idx) {
        const auto& ar = alignments[idx];
        const std::uint64_t pos = ar.alignment.pos;
        const std::size_t len = ar.seq.length();
        const auto it = std::lower_bound(
            infos.begin(), infos.end(), ar.alignment.gene_id,
            [](const detail::RefInfo& r, SurrogateId id) { return r.ref_id < id; });
        if (it == infos.end() || it->ref_id != ar.alignment.gene_id)
            throw DataError("alignment references unknown reference " +
                            std::to_string(ar.alignment.gene_id));
        const std::size_t r = static_cast<std::size_t>(it - infos.begin());
        if (pos < 1 || (len > 0 && pos + len - 1 > it->length))
            throw DataError("alignment " + std::to_string(ar.alignment.alignment_id) +
                            " out of reference bounds");
        const std::uint64_t g_lo = ref_offset[r] + pos - 1;
        if (g_lo < prev_global)
            throw DataError("alignments not sorted by (reference, position)");
        prev_global = g_lo;
        if (len == 0) continue;
        const std::uint64_t g_hi = g_lo + len;
        // route to every partition whose [boundary[c], boundary[c+1]) intersects [g_lo, g_hi)
        auto first_c = std::upper_bound(boundary.begin(), boundary.end(), g_lo);
        std::size_t c = static_cast<std::size_t>(first_c - boundary.begin()) - 1;
        for (; c < k && boundary[c] < g_hi; ++c)
            if (boundary[c + 1] > g_lo) out.part_indexes[c].push_back(idx);
    }
    return out;
}

namespace detail {

// Iterator adaptor presenting a vector of indexes into an AlignedRead span
// as a range of AlignedRead.
class IndexIter {
public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = AlignedRead;
    using difference_type = std::ptrdiff_t;
    using pointer = const AlignedRead*;
    using reference = const AlignedRead&;

    IndexIter(const AlignedRead* base, const std::size_t* idx) : base_(base), idx_(idx) {}
    reference operator*() const { return base_[*idx_]; }
    pointer operator->() const { return base_ + *idx_; }
    IndexIter& operator++() {
        ++idx_;
        return *this;
    }
    IndexIter operator++(int) {
        IndexIter t = *this;
        ++idx_;
        return t;
    }
    bool operator==(const IndexIter& o) const { return idx_ == o.idx_; }
    bool operator!=(const IndexIter& o) const { return idx_ != o.idx_; }

private:
    const AlignedRead* base_;
    const std::size_t* idx_;
};

}  // namespace detail

/// Parallel consensus: partitions the coordinate space into k ranges, runs
/// the sliding scan per range on up to `workers` threads, and concatenates
/// the per-range outputs in range order. Bit-identical to k = 1.
inline std::vector<ConsensusSequence> consensus_partitioned(
    std::span<const AlignedRead> alignments, std::span<const ReferenceSequence> refs,
    std::size_t k, std::size_t workers = 0) {
    const auto infos = detail::sorted_ref_infos(refs);
    auto parts = partition_alignments(alignments, k, refs);
    if (workers == 0) workers = parexec::default_worker_count();

    using RangeOutput = std::vector<std::pair<RefRange, std::string>>;
    auto task = [&](std::size_t c) -> RangeOutput {
        RangeOutput out;
        const auto& idxs = parts.part_indexes[c];
        for (const RefRange& range : parts.part_ranges[c]) {
            // slice of this partition's alignments belonging to range.ref_id
            std::size_t lo = 0, hi = idxs.size();
            while (lo < hi && alignments[idxs[lo]].alignment.gene_id < range.ref_id) ++lo;
            std::size_t end = lo;
            while (end < hi && alignments[idxs[end]].alignment.gene_id == range.ref_id) ++end;
            const std::uint64_t ref_len = detail::ref_length_or_throw(infos, range.ref_id);
            ConsensusAssembler assembler(range.begin_pos, range.end_pos - range.begin_pos);
            detail::slide_ref(detail::IndexIter(alignments.data(), idxs.data() + lo),
                              detail::IndexIter(alignments.data(), idxs.data() + end), ref_len,
                              range.begin_pos, range.end_pos, assembler);
            out.emplace_back(range, assembler.finish().str());
        }
        return out;
    };

    auto finalize = [&](std::vector<RangeOutput>&& results) {
        std::unordered_map<SurrogateId, std::string> pieces;
        for (auto& result : results)
            for (auto& [range, text] : result) pieces[range.ref_id] += text;
        std::vector<ConsensusSequence> out;
        out.reserve(infos.size());
        for (const auto& info : infos) {
            std::string text = std::move(pieces[info.ref_id]);
            if (text.size() != info.length)
                throw DataError("partitioned consensus for reference " +
                                std::to_string(info.ref_id) + " has length " +
                                std::to_string(text.size()) + ", expected " +
                                std::to_string(info.length));
            out.push_back({info.ref_id, Sequence(std::move(text))});
        }
        return out;
    };

    return parexec::run_parallel_ordered(k, workers, task, finalize);
}

// ---------------------------------------------------------------------------
// Debug dump
// ---------------------------------------------------------------------------

/// Pileup columns as TSV: ref, position, stacked bases, comma-separated
/// qualities. Debugging aid only.
inline std::string pileup_to_tsv(std::span<const PileupColumn> columns) {
    std::string out = "ref\tpos\tbases\tquals\n";
    for (const auto& col : columns) {
        out += std::to_string(col.ref_id);
        out += '\t';
        out += std::to_string(col.pos);
        out += '\t';
        for (const auto& [base, qual] : col.entries) out.push_back(base);
        out += '\t';
        for (std::size_t i = 0; i < col.entries.size(); ++i) {
            if (i) out.push_back(',');
            out += std::to_string(int(col.entries[i].second));
        }
        out += '\n';
    }
    return out;
}

}  // namespace seqdb::consensus
