#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace seqdb {

using SurrogateId = std::uint64_t;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for all seqdb errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input data while parsing; carries the byte offset of the
/// offending region and the ordinal of the record being parsed (1-based).
class ParseError : public Error {
public:
    ParseError(std::string msg, std::uint64_t byte_offset, std::uint64_t record_ordinal)
        : Error(std::move(msg)), byte_offset_(byte_offset), record_ordinal_(record_ordinal) {}

    std::uint64_t byte_offset() const noexcept { return byte_offset_; }
    std::uint64_t record_ordinal() const noexcept { return record_ordinal_; }

private:
    std::uint64_t byte_offset_;
    std::uint64_t record_ordinal_;
};

/// A record does not fit the iterator's buffer (FASTQ only).
class CapacityError : public ParseError {
public:
    CapacityError(std::string msg, std::uint64_t byte_offset, std::uint64_t record_ordinal,
                  std::uint64_t required_bytes)
        : ParseError(std::move(msg), byte_offset, record_ordinal), required_bytes_(required_bytes) {}

    /// Buffer size that would have been needed for the offending record.
    std::uint64_t required_bytes() const noexcept { return required_bytes_; }

private:
    std::uint64_t required_bytes_;
};

/// Violated referential integrity, duplicate keys, out-of-bounds
/// coordinates and similar data-level problems.
class DataError : public Error {
public:
    using Error::Error;
};

/// I/O failure; carries the offset reached in the source when known.
class IoError : public Error {
public:
    explicit IoError(std::string msg, std::uint64_t byte_offset = 0)
        : Error(std::move(msg)), byte_offset_(byte_offset) {}

    std::uint64_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::uint64_t byte_offset_;
};

// ---------------------------------------------------------------------------
// Base alphabet
// ---------------------------------------------------------------------------

// The five legal base symbols are 'A', 'C', 'G', 'T' and 'N'.
// 'N' marks an uncertain call.

inline bool is_base_symbol(char c) noexcept {
    return c == 'A' || c == 'C' || c == 'G' || c == 'T' || c == 'N';
}

/// Uppercases a base symbol; returns '\0' if the byte is not a legal base
/// in either case.
inline char normalize_base(char c) noexcept {
    switch (c) {
    case 'A': case 'a': return 'A';
    case 'C': case 'c': return 'C';
    case 'G': case 'g': return 'G';
    case 'T': case 't': return 'T';
    case 'N': case 'n': return 'N';
    default: return '\0';
    }
}

inline char complement_base(char c) noexcept {
    switch (c) {
    case 'A': return 'T';
    case 'C': return 'G';
    case 'G': return 'C';
    case 'T': return 'A';
    default: return 'N';
    }
}

/// Maps A,C,G,T to 0..3; everything else (incl. N) to 4.
inline unsigned base_code(char c) noexcept {
    switch (c) {
    case 'A': return 0;
    case 'C': return 1;
    case 'G': return 2;
    case 'T': return 3;
    default: return 4;
    }
}

inline char base_from_code(unsigned code) noexcept {
    static constexpr std::array<char, 5> tab{'A', 'C', 'G', 'T', 'N'};
    return tab[code < 5 ? code : 4];
}

// ---------------------------------------------------------------------------
// Sequence
// ---------------------------------------------------------------------------

/// An ordered run of base symbols. The empty sequence is legal. Construction
/// does not validate; `first_invalid()` reports offending positions so that
/// validation failures stay data rather than exceptions.
class Sequence {
public:
    Sequence() = default;
    explicit Sequence(std::string bases) : bases_(std::move(bases)) {}

    std::size_t length() const noexcept { return bases_.size(); }
    bool empty() const noexcept { return bases_.empty(); }
    char operator[](std::size_t i) const noexcept { return bases_[i]; }
    const std::string& str() const noexcept { return bases_; }

    auto begin() const noexcept { return bases_.begin(); }
    auto end() const noexcept { return bases_.end(); }

    /// Index of the first byte that is not one of A,C,G,T,N.
    std::optional<std::size_t> first_invalid() const noexcept {
        for (std::size_t i = 0; i < bases_.size(); ++i)
            if (!is_base_symbol(bases_[i])) return i;
        return std::nullopt;
    }

    bool operator==(const Sequence& o) const noexcept { return bases_ == o.bases_; }
    bool operator!=(const Sequence& o) const noexcept { return bases_ != o.bases_; }
    bool operator<(const Sequence& o) const noexcept { return bases_ < o.bases_; }

private:
    std::string bases_;
};

/// True iff any base of the sequence is 'N'.
inline bool contains_n(const Sequence& seq) noexcept {
    return seq.str().find('N') != std::string::npos;
}

inline Sequence reverse_complement(const Sequence& seq) {
    std::string out;
    out.resize(seq.length());
    for (std::size_t i = 0; i < seq.length(); ++i)
        out[i] = complement_base(seq[seq.length() - 1 - i]);
    return Sequence(std::move(out));
}

// ---------------------------------------------------------------------------
// Quality scores
// ---------------------------------------------------------------------------

/// Per-base Phred scores, one per base, each in [0, 93]. Serialized to disk
/// as ASCII with offset +33 (Sanger convention).
class QualityVector {
public:
    static constexpr int kMaxScore = 93;
    static constexpr char kAsciiOffset = 33;

    QualityVector() = default;
    explicit QualityVector(std::vector<std::uint8_t> scores) : scores_(std::move(scores)) {}

    /// Decodes an ASCII Phred+33 string. Throws std::invalid_argument on a
    /// byte outside [33, 126].
    static QualityVector from_phred33(std::string_view text) {
        std::vector<std::uint8_t> scores;
        scores.reserve(text.size());
        for (char c : text) {
            const unsigned char u = static_cast<unsigned char>(c);
            if (u < 33 || u > 126)
                throw std::invalid_argument("quality byte outside Phred+33 range");
            scores.push_back(static_cast<std::uint8_t>(u - kAsciiOffset));
        }
        return QualityVector(std::move(scores));
    }

    std::string to_phred33() const {
        std::string out;
        out.reserve(scores_.size());
        for (std::uint8_t s : scores_)
            out.push_back(static_cast<char>(s + kAsciiOffset));
        return out;
    }

    std::size_t length() const noexcept { return scores_.size(); }
    bool empty() const noexcept { return scores_.empty(); }
    std::uint8_t operator[](std::size_t i) const noexcept { return scores_[i]; }
    const std::vector<std::uint8_t>& scores() const noexcept { return scores_; }

    bool operator==(const QualityVector& o) const noexcept { return scores_ == o.scores_; }
    bool operator!=(const QualityVector& o) const noexcept { return scores_ != o.scores_; }

private:
    std::vector<std::uint8_t> scores_;
};

// ---------------------------------------------------------------------------
// Provenance and keys
// ---------------------------------------------------------------------------

/// Physical origin of a read: machine, flowcell, lane (1-8), tile and the
/// x/y spot on the tile. The canonical textual form is
/// "instrument:flowcell:lane:tile:x:y".
struct ReadCoordinates {
    std::string instrument;
    std::string flowcell;
    std::uint32_t lane = 1;  // flowcells have 8 physical lanes
    std::uint32_t tile = 1;
    std::uint32_t x = 0;
    std::uint32_t y = 0;

    bool operator==(const ReadCoordinates& o) const noexcept {
        return lane == o.lane && tile == o.tile && x == o.x && y == o.y &&
               instrument == o.instrument && flowcell == o.flowcell;
    }

    std::string to_name() const {
        std::string out = instrument;
        out += ':';
        out += flowcell;
        out += ':';
        out += std::to_string(lane);
        out += ':';
        out += std::to_string(tile);
        out += ':';
        out += std::to_string(x);
        out += ':';
        out += std::to_string(y);
        return out;
    }

    /// Decomposes a canonical read name. Returns nullopt if the name does
    /// not split into the six expected fields.
    static std::optional<ReadCoordinates> from_name(std::string_view name) {
        std::array<std::string_view, 6> fields;
        std::size_t field = 0, start = 0;
        for (std::size_t i = 0; i <= name.size(); ++i) {
            if (i == name.size() || name[i] == ':') {
                if (field >= 6) return std::nullopt;
                fields[field++] = name.substr(start, i - start);
                start = i + 1;
            }
        }
        if (field != 6) return std::nullopt;
        if (fields[0].empty() || fields[1].empty()) return std::nullopt;
        ReadCoordinates rc;
        rc.instrument = std::string(fields[0]);
        rc.flowcell = std::string(fields[1]);
        auto parse_u32 = [](std::string_view s, std::uint32_t& out) {
            if (s.empty() || s.size() > 9) return false;
            std::uint64_t v = 0;
            for (char c : s) {
                if (c < '0' || c > '9') return false;
                v = v * 10 + static_cast<std::uint64_t>(c - '0');
            }
            out = static_cast<std::uint32_t>(v);
            return true;
        };
        if (!parse_u32(fields[2], rc.lane)) return std::nullopt;
        if (!parse_u32(fields[3], rc.tile)) return std::nullopt;
        if (!parse_u32(fields[4], rc.x)) return std::nullopt;
        if (!parse_u32(fields[5], rc.y)) return std::nullopt;
        return rc;
    }
};

/// Identifies one sample of one experiment: (experiment, sample group,
/// sample), all surrogate ids and all > 0.
struct SampleKey {
    SurrogateId experiment_id = 0;
    SurrogateId sample_group_id = 0;
    SurrogateId sample_id = 0;

    bool valid() const noexcept {
        return experiment_id > 0 && sample_group_id > 0 && sample_id > 0;
    }

    bool operator==(const SampleKey& o) const noexcept {
        return experiment_id == o.experiment_id && sample_group_id == o.sample_group_id &&
               sample_id == o.sample_id;
    }
    bool operator!=(const SampleKey& o) const noexcept { return !(*this == o); }
    bool operator<(const SampleKey& o) const noexcept {
        return std::tie(experiment_id, sample_group_id, sample_id) <
               std::tie(o.experiment_id, o.sample_group_id, o.sample_id);
    }
};

// ---------------------------------------------------------------------------
// Entities
// ---------------------------------------------------------------------------

enum class Strand : std::uint8_t { forward = 0, reverse = 1 };

inline char strand_symbol(Strand s) noexcept { return s == Strand::forward ? '+' : '-'; }

/// One sequenced fragment with its provenance and per-base qualities.
struct ShortRead {
    SurrogateId read_id = 0;
    SampleKey sample;
    ReadCoordinates coords;
    Sequence seq;
    QualityVector qual;
};

/// A distinct read sequence with its observed frequency in one sample.
struct Tag {
    SurrogateId tag_id = 0;
    SampleKey sample;
    Sequence seq;
    std::uint32_t frequency = 0;  // number of source reads with this sequence
    std::uint32_t rank = 0;       // 1-based, dense within the sample
};

/// A named chromosome-scale base string.
struct ReferenceSequence {
    SurrogateId ref_id = 0;
    std::string name;
    Sequence seq;
};

/// Placement of a tag or read against a reference at a 1-based position.
struct Alignment {
    SurrogateId alignment_id = 0;
    SampleKey sample;
    SurrogateId subject_id = 0;  // tag_id or read_id, depending on the analysis
    SurrogateId gene_id = 0;     // ref_id of the matched reference
    std::uint64_t pos = 1;       // 1-based start on the reference
    Strand strand = Strand::forward;
};

/// Aggregated activity of one gene in one sample.
struct GeneExpression {
    SurrogateId gene_id = 0;
    SampleKey sample;
    std::uint64_t total_frequency = 0;  // sum of aligned tag frequencies
    std::uint32_t tag_count = 0;        // aligned tag rows contributing
};

/// Per-reference result of consensus calling; uncovered positions hold 'N'
/// and the length always equals the reference length.
struct ConsensusSequence {
    SurrogateId ref_id = 0;
    Sequence seq;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Checks every ShortRead invariant and returns one message per violation.
/// An empty result means the read is acceptable. Violations are data, not
/// failures: nothing throws here.
inline std::vector<std::string> validate_read(const ShortRead& read) {
    std::vector<std::string> violations;
    if (auto bad = read.seq.first_invalid())
        violations.push_back("illegal symbol '" + std::string(1, read.seq[*bad]) +
                             "' at base index " + std::to_string(*bad));
    if (read.seq.length() != read.qual.length())
        violations.push_back("sequence length " + std::to_string(read.seq.length()) +
                             " != quality length " + std::to_string(read.qual.length()));
    if (read.coords.lane < 1 || read.coords.lane > 8)
        violations.push_back("lane " + std::to_string(read.coords.lane) +
                             " outside flowcell range [1,8]");
    if (read.coords.tile < 1)
        violations.push_back("tile must be >= 1");
    if (!read.sample.valid())
        violations.push_back("sample key components must all be > 0");
    for (std::uint8_t s : read.qual.scores())
        if (s > QualityVector::kMaxScore) {
            violations.push_back("quality score above " +
                                 std::to_string(int(QualityVector::kMaxScore)));
            break;
        }
    return violations;
}

}  // namespace seqdb

template <>
struct std::hash<seqdb::SampleKey> {
    std::size_t operator()(const seqdb::SampleKey& k) const noexcept {
        std::size_t h = std::hash<seqdb::SurrogateId>{}(k.experiment_id);
        h ^= std::hash<seqdb::SurrogateId>{}(k.sample_group_id) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h ^= std::hash<seqdb::SurrogateId>{}(k.sample_id) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return h;
    }
};
