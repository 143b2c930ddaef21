#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "seqdb/codec.hpp"
#include "seqdb/core.hpp"
#include "seqdb/fastx.hpp"

namespace seqdb::store {

// ---------------------------------------------------------------------------
// Wire format: little-endian fixed-width integers (8-byte surrogate ids,
// 4-byte counts) and length-prefixed byte strings. This is both the
// persistence format and the byte math behind the storage report.
// ---------------------------------------------------------------------------

namespace wire {

template <typename Sink>
void put_u8(Sink& s, std::uint8_t v) {
    s.append(reinterpret_cast<const char*>(&v), 1);
}

template <typename Sink>
void put_u32(Sink& s, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
    s.append(b, 4);
}

template <typename Sink>
void put_u64(Sink& s, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
    s.append(b, 8);
}

template <typename Sink>
void put_bytes(Sink& s, std::string_view v) {
    put_u32(s, static_cast<std::uint32_t>(v.size()));
    s.append(v.data(), v.size());
}

struct CountingSink {
    std::uint64_t bytes = 0;
    void append(const char*, std::size_t n) { bytes += n; }
};

struct StringSink {
    std::string data;
    void append(const char* p, std::size_t n) { data.append(p, n); }
};

struct StreamSink {
    std::ostream& out;
    void append(const char* p, std::size_t n) { out.write(p, static_cast<std::streamsize>(n)); }
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

    std::uint32_t u32() {
        const auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(std::uint8_t(b[i])) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        const auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(std::uint8_t(b[i])) << (8 * i);
        return v;
    }

    std::string_view bytes() { return take(u32()); }

    std::string_view take(std::size_t n) {
        if (pos_ + n > data_.size()) throw DataError("catalog record truncated");
        const auto v = data_.substr(pos_, n);
        pos_ += n;
        return v;
    }

    bool done() const noexcept { return pos_ >= data_.size(); }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

template <typename Sink>
void put_encoded_seq(Sink& s, const codec::EncodedSequence& e) {
    put_u8(s, static_cast<std::uint8_t>(e.codec));
    put_u32(s, e.original_length);
    put_u32(s, static_cast<std::uint32_t>(e.payload.size()));
    s.append(reinterpret_cast<const char*>(e.payload.data()), e.payload.size());
    put_u32(s, static_cast<std::uint32_t>(e.n_exceptions.size()));
    for (auto p : e.n_exceptions) put_u32(s, p);
}

inline codec::EncodedSequence get_encoded_seq(Reader& r) {
    codec::EncodedSequence e;
    e.codec = static_cast<codec::SeqCodec>(r.u8());
    e.original_length = r.u32();
    const auto payload = r.bytes();
    e.payload.assign(payload.begin(), payload.end());
    const std::uint32_t n = r.u32();
    e.n_exceptions.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) e.n_exceptions.push_back(r.u32());
    return e;
}

}  // namespace wire

// ---------------------------------------------------------------------------
// Entities owned by the store
// ---------------------------------------------------------------------------

struct Experiment {
    SurrogateId id = 0;
    std::string name;
};

struct SampleGroup {
    SurrogateId id = 0;
    SurrogateId experiment_id = 0;
    std::string name;
};

struct Sample {
    SurrogateId id = 0;
    SurrogateId sample_group_id = 0;
    std::string name;
};

/// Interned (instrument, flowcell) pair; the normalized schema stores a
/// run_id per read instead of repeating the textual identifiers.
struct FlowcellRun {
    SurrogateId id = 0;
    std::string instrument;
    std::string flowcell;
};

/// Baseline row for the storage study: the file structure imported as-is,
/// composite textual name (and the '+' line repeating it) kept per row.
struct OneToOneRead {
    SurrogateId row_id = 0;
    SampleKey sample;
    std::uint32_t lane = 1;
    std::string name;
    std::string seq_text;
    std::string plus;
    std::string qual_text;  // Phred+33, as in the file
};

enum class BlobFormat : std::uint8_t { fastq = 0, fasta = 1, other = 2 };

inline std::optional<BlobFormat> parse_blob_format(std::string_view tag) {
    std::string t;
    for (char c : tag) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (t == "fastq") return BlobFormat::fastq;
    if (t == "fasta") return BlobFormat::fasta;
    if (t == "other") return BlobFormat::other;
    return std::nullopt;
}

inline const char* blob_format_tag(BlobFormat f) {
    switch (f) {
    case BlobFormat::fastq: return "FastQ";
    case BlobFormat::fasta: return "Fasta";
    default: return "other";
    }
}

/// Content-derived 128-bit identifier, formatted as a canonical GUID.
/// Deriving it from the content and registration key keeps runs
/// reproducible for identical inputs.
struct Guid {
    std::array<std::uint8_t, 16> bytes{};

    std::string to_string() const {
        static const char* hex = "0123456789abcdef";
        std::string out;
        out.reserve(36);
        for (std::size_t i = 0; i < 16; ++i) {
            if (i == 4 || i == 6 || i == 8 || i == 10) out.push_back('-');
            out.push_back(hex[bytes[i] >> 4]);
            out.push_back(hex[bytes[i] & 0xf]);
        }
        return out;
    }

    static std::optional<Guid> parse(std::string_view text) {
        if (text.size() != 36) return std::nullopt;
        Guid g;
        std::size_t bi = 0;
        for (std::size_t i = 0; i < 36;) {
            if (i == 8 || i == 13 || i == 18 || i == 23) {
                if (text[i] != '-') return std::nullopt;
                ++i;
                continue;
            }
            auto nib = [](char c) -> int {
                if (c >= '0' && c <= '9') return c - '0';
                if (c >= 'a' && c <= 'f') return c - 'a' + 10;
                if (c >= 'A' && c <= 'F') return c - 'A' + 10;
                return -1;
            };
            const int hi = nib(text[i]), lo = nib(text[i + 1]);
            if (hi < 0 || lo < 0) return std::nullopt;
            g.bytes[bi++] = static_cast<std::uint8_t>((hi << 4) | lo);
            i += 2;
        }
        return g;
    }

    bool operator==(const Guid& o) const { return bytes == o.bytes; }
};

struct BlobEntry {
    Guid guid;
    SampleKey sample;
    std::uint32_t lane = 1;
    std::string path;
    std::uint64_t byte_length = 0;
    BlobFormat format = BlobFormat::other;
};

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

/// Normalized in-process store. Every entity carries a dense, sequentially
/// allocated surrogate id; foreign references are checked on insert and by
/// verify_integrity(). Persistence is a directory with one append-only
/// file per catalog; the default store is purely in-memory.
///
/// Concurrency: many readers or one writer, never both.
class Store {
public:
    Store() = default;

    /// Attaches a directory, loading any existing catalogs.
    static Store open(const std::filesystem::path& dir) {
        Store s;
        s.dir_ = dir;
        std::filesystem::create_directories(dir / "catalog");
        s.load();
        return s;
    }

    bool persistent() const noexcept { return !dir_.empty(); }

    // -- sample hierarchy ---------------------------------------------------

    /// Ensures the (experiment, group, sample) rows behind a key exist,
    /// creating them when the key extends each catalog densely. A key that
    /// would leave id gaps, or that contradicts an existing row's lineage,
    /// is a data error.
    void ensure_sample(const SampleKey& key) {
        if (!key.valid()) throw DataError("sample key components must all be > 0");
        ensure_dense("experiment", experiments_.size(), key.experiment_id);
        if (key.experiment_id > experiments_.size())
            experiments_.push_back({key.experiment_id, ""});
        ensure_dense("sample group", sample_groups_.size(), key.sample_group_id);
        if (key.sample_group_id > sample_groups_.size())
            sample_groups_.push_back({key.sample_group_id, key.experiment_id, ""});
        else if (sample_groups_[key.sample_group_id - 1].experiment_id != key.experiment_id)
            throw DataError("sample group " + std::to_string(key.sample_group_id) +
                            " belongs to experiment " +
                            std::to_string(sample_groups_[key.sample_group_id - 1].experiment_id));
        ensure_dense("sample", samples_.size(), key.sample_id);
        if (key.sample_id > samples_.size())
            samples_.push_back({key.sample_id, key.sample_group_id, ""});
        else if (samples_[key.sample_id - 1].sample_group_id != key.sample_group_id)
            throw DataError("sample " + std::to_string(key.sample_id) + " belongs to group " +
                            std::to_string(samples_[key.sample_id - 1].sample_group_id));
    }

    // -- imports ------------------------------------------------------------

    /// Imports a FASTQ stream into the normalized schema: fresh surrogate
    /// read ids, names decomposed into coordinates, (instrument, flowcell)
    /// interned. Re-importing the same coordinates into a sample is a
    /// duplicate error.
    std::uint64_t import_fastq_normalized(std::unique_ptr<fastx::ByteSource> source,
                                          const SampleKey& sample, std::uint32_t lane,
                                          std::size_t buffer_size = fastx::kDefaultBufferSize) {
        ensure_sample(sample);
        fastx::FastqReader reader(std::move(source), buffer_size);
        std::uint64_t imported = 0;
        while (auto rec = reader.next()) {
            const auto coords = ReadCoordinates::from_name(rec->name);
            if (!coords)
                throw DataError("record " + std::to_string(reader.records_yielded()) +
                                ": name '" + rec->name +
                                "' does not decompose into read coordinates");
            if (coords->lane != lane)
                throw DataError("record " + std::to_string(reader.records_yielded()) +
                                ": name lane " + std::to_string(coords->lane) +
                                " contradicts file lane " + std::to_string(lane));
            add_read(sample, *coords, std::move(rec->seq), std::move(rec->qual));
            ++imported;
        }
        return imported;
    }

    /// Adds one read to the normalized catalogs. Exposed for tests and
    /// synthetic pipelines; import_fastq_normalized is the file path.
    const ShortRead& add_read(const SampleKey& sample, const ReadCoordinates& coords,
                              Sequence seq, QualityVector qual) {
        ensure_sample(sample);
        if (seq.length() != qual.length())
            throw DataError("read sequence and quality lengths differ");
        if (auto bad = seq.first_invalid())
            throw DataError("read contains illegal symbol at index " + std::to_string(*bad));
        std::string key = coord_key(sample, coords);
        if (!coord_index_.insert(key).second)
            throw DataError("duplicate coordinates in sample: " + coords.to_name());
        ShortRead read;
        read.read_id = reads_.size() + 1;
        read.sample = sample;
        read.coords = coords;
        read.seq = std::move(seq);
        read.qual = std::move(qual);
        intern_run(coords.instrument, coords.flowcell);
        reads_.push_back(std::move(read));
        return reads_.back();
    }

    /// Imports a FASTQ stream keeping the file structure as-is, textual
    /// composite name included. This is the storage-study baseline, not a
    /// working representation.
    std::uint64_t import_fastq_1to1(std::unique_ptr<fastx::ByteSource> source,
                                    const SampleKey& sample, std::uint32_t lane,
                                    std::size_t buffer_size = fastx::kDefaultBufferSize) {
        ensure_sample(sample);
        fastx::FastqReader reader(std::move(source), buffer_size);
        std::uint64_t imported = 0;
        while (auto rec = reader.next()) {
            OneToOneRead row;
            row.row_id = reads_1to1_.size() + 1;
            row.sample = sample;
            row.lane = lane;
            row.name = std::move(rec->name);
            row.seq_text = rec->seq.str();
            row.plus = std::move(rec->plus);
            row.qual_text = rec->qual.to_phred33();
            reads_1to1_.push_back(std::move(row));
            ++imported;
        }
        return imported;
    }

    // -- blob registry (hybrid design) ---------------------------------------

    /// Registers a file by reference: the registry row records location,
    /// size and format, while the content stays untouched on disk.
    Guid register_blob(const std::filesystem::path& path, const SampleKey& sample,
                       std::uint32_t lane, std::string_view format_tag) {
        const auto format = parse_blob_format(format_tag);
        if (!format)
            throw DataError("unknown format tag '" + std::string(format_tag) +
                            "' (expected FastQ, Fasta or other)");
        std::error_code ec;
        const auto size = std::filesystem::file_size(path, ec);
        if (ec) throw IoError("cannot stat file: " + path.string());
        const auto abs = std::filesystem::absolute(path, ec);
        if (ec) throw IoError("cannot resolve path: " + path.string());
        ensure_sample(sample);
        Guid guid = hash_file(path, sample, lane);
        if (guid_index_.count(guid.to_string()))
            throw DataError("blob already registered: " + guid.to_string());
        BlobEntry entry{guid, sample, lane, abs.string(), size, *format};
        guid_index_.emplace(guid.to_string(), blobs_.size());
        blobs_.push_back(std::move(entry));
        return guid;
    }

    const BlobEntry* find_blob(const Guid& guid) const {
        const auto it = guid_index_.find(guid.to_string());
        return it == guid_index_.end() ? nullptr : &blobs_[it->second];
    }

    const BlobEntry& blob_or_throw(const Guid& guid) const {
        const auto* e = find_blob(guid);
        if (!e) throw DataError("no blob registered under " + guid.to_string());
        return *e;
    }

    /// Streams the records of a registered FASTQ blob straight off the
    /// file, without copying the content into the store.
    fastx::FastqReader list_blob_fastq(const Guid& guid,
                                       std::size_t buffer_size = fastx::kDefaultBufferSize) const {
        const auto& e = blob_or_throw(guid);
        if (e.format != BlobFormat::fastq)
            throw DataError("blob " + guid.to_string() + " is not FastQ (tag: " +
                            blob_format_tag(e.format) + ")");
        return fastx::open_fastq(std::filesystem::path(e.path), buffer_size);
    }

    fastx::FastaReader list_blob_fasta(const Guid& guid,
                                       std::size_t buffer_size = fastx::kDefaultBufferSize) const {
        const auto& e = blob_or_throw(guid);
        if (e.format != BlobFormat::fasta)
            throw DataError("blob " + guid.to_string() + " is not Fasta (tag: " +
                            blob_format_tag(e.format) + ")");
        return fastx::open_fasta(std::filesystem::path(e.path), buffer_size);
    }

    // -- references, tags, alignments, expressions ---------------------------

    const ReferenceSequence& add_reference(std::string name, Sequence seq) {
        if (seq.length() < 1) throw DataError("reference sequence must not be empty");
        if (ref_name_index_.count(name))
            throw DataError("reference name already in use: " + name);
        ReferenceSequence ref;
        ref.ref_id = references_.size() + 1;
        ref.name = std::move(name);
        ref.seq = std::move(seq);
        ref_name_index_.emplace(ref.name, ref.ref_id);
        references_.push_back(std::move(ref));
        return references_.back();
    }

    const ReferenceSequence* find_reference_by_name(std::string_view name) const {
        const auto it = ref_name_index_.find(std::string(name));
        return it == ref_name_index_.end() ? nullptr : &references_[it->second - 1];
    }

    const Tag& add_tag(const SampleKey& sample, Sequence seq, std::uint32_t frequency,
                       std::uint32_t rank) {
        ensure_sample(sample);
        if (frequency < 1) throw DataError("tag frequency must be >= 1");
        if (contains_n(seq)) throw DataError("tags must not contain N");
        Tag t{tags_.size() + 1, sample, std::move(seq), frequency, rank};
        tags_.push_back(std::move(t));
        return tags_.back();
    }

    const Alignment& add_alignment(const SampleKey& sample, SurrogateId subject_id,
                                   SurrogateId gene_id, std::uint64_t pos, Strand strand) {
        ensure_sample(sample);
        if (gene_id < 1 || gene_id > references_.size())
            throw DataError("alignment references unknown reference " + std::to_string(gene_id));
        const std::size_t subject_len = subject_length(subject_id);
        const std::uint64_t ref_len = references_[gene_id - 1].seq.length();
        if (pos < 1 || (subject_len > 0 && pos + subject_len - 1 > ref_len))
            throw DataError("alignment at position " + std::to_string(pos) +
                            " exceeds reference length " + std::to_string(ref_len));
        Alignment a{alignments_.size() + 1, sample, subject_id, gene_id, pos, strand};
        alignments_.push_back(a);
        return alignments_.back();
    }

    const GeneExpression& add_expression(const GeneExpression& row) {
        if (row.gene_id < 1 || row.gene_id > references_.size())
            throw DataError("expression references unknown gene " + std::to_string(row.gene_id));
        ensure_sample(row.sample);
        expressions_.push_back(row);
        return expressions_.back();
    }

    /// Loads alignments from headerless TSV lines of the form
    /// subject_id<TAB>ref_name<TAB>pos<TAB>strand. Errors carry the line
    /// number. Subjects resolve against tags first, then reads.
    std::uint64_t load_alignments_tsv(std::istream& in, const SampleKey& sample) {
        ensure_sample(sample);
        std::string line;
        std::uint64_t line_no = 0, loaded = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            try {
                std::array<std::string_view, 4> f{};
                std::size_t field = 0, start = 0;
                for (std::size_t i = 0; i <= line.size(); ++i) {
                    if (i == line.size() || line[i] == '\t') {
                        if (field >= 4) throw DataError("too many columns");
                        f[field++] = std::string_view(line).substr(start, i - start);
                        start = i + 1;
                    }
                }
                if (field != 4) throw DataError("expected 4 tab-separated columns");
                const SurrogateId subject = parse_number(f[0], "subject id");
                const auto* ref = find_reference_by_name(f[1]);
                if (!ref) throw DataError("unknown reference name '" + std::string(f[1]) + "'");
                const std::uint64_t pos = parse_number(f[2], "position");
                Strand strand;
                if (f[3] == "+") strand = Strand::forward;
                else if (f[3] == "-") strand = Strand::reverse;
                else throw DataError("strand must be '+' or '-'");
                add_alignment(sample, subject, ref->ref_id, pos, strand);
                ++loaded;
            } catch (const DataError& e) {
                throw DataError("alignments line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        return loaded;
    }

    // -- access ---------------------------------------------------------------

    std::span<const Experiment> experiments() const noexcept { return experiments_; }
    std::span<const SampleGroup> sample_groups() const noexcept { return sample_groups_; }
    std::span<const Sample> samples() const noexcept { return samples_; }
    std::span<const FlowcellRun> runs() const noexcept { return runs_; }
    std::span<const ShortRead> reads() const noexcept { return reads_; }
    std::span<const OneToOneRead> reads_1to1() const noexcept { return reads_1to1_; }
    std::span<const Tag> tags() const noexcept { return tags_; }
    std::span<const ReferenceSequence> references() const noexcept { return references_; }
    std::span<const Alignment> alignments() const noexcept { return alignments_; }
    std::span<const GeneExpression> expressions() const noexcept { return expressions_; }
    std::span<const BlobEntry> blobs() const noexcept { return blobs_; }

    SurrogateId run_id_for(std::string_view instrument, std::string_view flowcell) const {
        const auto it = run_index_.find(run_key(instrument, flowcell));
        return it == run_index_.end() ? 0 : it->second;
    }

    std::size_t subject_length(SurrogateId subject_id) const {
        if (subject_id >= 1 && subject_id <= tags_.size())
            return tags_[subject_id - 1].seq.length();
        if (subject_id >= 1 && subject_id <= reads_.size())
            return reads_[subject_id - 1].seq.length();
        throw DataError("subject id " + std::to_string(subject_id) +
                        " resolves to neither a tag nor a read");
    }

    /// Full-scan referential integrity check; returns one message per
    /// problem found.
    std::vector<std::string> verify_integrity() const {
        std::vector<std::string> problems;
        auto check_dense = [&](std::string_view what, std::size_t i, SurrogateId id) {
            if (id != i + 1)
                problems.push_back(std::string(what) + " id " + std::to_string(id) +
                                   " breaks dense allocation at index " + std::to_string(i));
        };
        for (std::size_t i = 0; i < experiments_.size(); ++i)
            check_dense("experiment", i, experiments_[i].id);
        for (std::size_t i = 0; i < sample_groups_.size(); ++i) {
            check_dense("sample group", i, sample_groups_[i].id);
            if (sample_groups_[i].experiment_id < 1 ||
                sample_groups_[i].experiment_id > experiments_.size())
                problems.push_back("sample group " + std::to_string(i + 1) +
                                   " references missing experiment");
        }
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            check_dense("sample", i, samples_[i].id);
            if (samples_[i].sample_group_id < 1 ||
                samples_[i].sample_group_id > sample_groups_.size())
                problems.push_back("sample " + std::to_string(i + 1) +
                                   " references missing group");
        }
        auto check_sample = [&](std::string_view what, SurrogateId row, const SampleKey& k) {
            const bool ok = k.experiment_id >= 1 && k.experiment_id <= experiments_.size() &&
                            k.sample_group_id >= 1 && k.sample_group_id <= sample_groups_.size() &&
                            k.sample_id >= 1 && k.sample_id <= samples_.size();
            if (!ok)
                problems.push_back(std::string(what) + " " + std::to_string(row) +
                                   " references missing sample");
        };
        for (std::size_t i = 0; i < reads_.size(); ++i) {
            check_dense("read", i, reads_[i].read_id);
            check_sample("read", reads_[i].read_id, reads_[i].sample);
            if (run_id_for(reads_[i].coords.instrument, reads_[i].coords.flowcell) == 0)
                problems.push_back("read " + std::to_string(i + 1) + " has no interned run");
        }
        for (std::size_t i = 0; i < tags_.size(); ++i) {
            check_dense("tag", i, tags_[i].tag_id);
            check_sample("tag", tags_[i].tag_id, tags_[i].sample);
        }
        for (std::size_t i = 0; i < references_.size(); ++i)
            check_dense("reference", i, references_[i].ref_id);
        for (std::size_t i = 0; i < alignments_.size(); ++i) {
            const auto& a = alignments_[i];
            check_dense("alignment", i, a.alignment_id);
            check_sample("alignment", a.alignment_id, a.sample);
            if (a.gene_id < 1 || a.gene_id > references_.size())
                problems.push_back("alignment " + std::to_string(a.alignment_id) +
                                   " references missing reference");
        }
        for (const auto& e : expressions_)
            if (e.gene_id < 1 || e.gene_id > references_.size())
                problems.push_back("expression row references missing gene");
        for (const auto& b : blobs_)
            if (!std::filesystem::exists(b.path))
                problems.push_back("blob " + b.guid.to_string() + " missing at " + b.path);
        return problems;
    }

    // -- persistence ----------------------------------------------------------

    /// Appends rows added since the last save to the per-catalog files.
    void save() {
        if (!persistent()) throw Error("store is in-memory; open() a directory to persist");
        save_catalog("experiments", experiments_, persisted_.experiments,
                     [](auto& sink, const Experiment& e) {
                         wire::put_u64(sink, e.id);
                         wire::put_bytes(sink, e.name);
                     });
        save_catalog("sample_groups", sample_groups_, persisted_.sample_groups,
                     [](auto& sink, const SampleGroup& g) {
                         wire::put_u64(sink, g.id);
                         wire::put_u64(sink, g.experiment_id);
                         wire::put_bytes(sink, g.name);
                     });
        save_catalog("samples", samples_, persisted_.samples,
                     [](auto& sink, const Sample& s) {
                         wire::put_u64(sink, s.id);
                         wire::put_u64(sink, s.sample_group_id);
                         wire::put_bytes(sink, s.name);
                     });
        save_catalog("runs", runs_, persisted_.runs, [](auto& sink, const FlowcellRun& r) {
            wire::put_u64(sink, r.id);
            wire::put_bytes(sink, r.instrument);
            wire::put_bytes(sink, r.flowcell);
        });
        save_catalog("reads", reads_, persisted_.reads, [this](auto& sink, const ShortRead& r) {
            write_read_row(sink, r, codec::SeqCodec::packed2bit);
        });
        save_catalog("reads_1to1", reads_1to1_, persisted_.reads_1to1,
                     [](auto& sink, const OneToOneRead& r) { write_1to1_row(sink, r); });
        save_catalog("tags", tags_, persisted_.tags, [](auto& sink, const Tag& t) {
            write_tag_row(sink, t, codec::SeqCodec::packed2bit);
        });
        save_catalog("references", references_, persisted_.references,
                     [](auto& sink, const ReferenceSequence& r) {
                         write_reference_row(sink, r, codec::SeqCodec::packed2bit);
                     });
        save_catalog("alignments", alignments_, persisted_.alignments,
                     [](auto& sink, const Alignment& a) { write_alignment_row(sink, a); });
        save_catalog("expressions", expressions_, persisted_.expressions,
                     [](auto& sink, const GeneExpression& e) { write_expression_row(sink, e); });
        save_catalog("blobs", blobs_, persisted_.blobs, [](auto& sink, const BlobEntry& b) {
            sink.append(reinterpret_cast<const char*>(b.guid.bytes.data()), 16);
            wire::put_u64(sink, b.sample.experiment_id);
            wire::put_u64(sink, b.sample.sample_group_id);
            wire::put_u64(sink, b.sample.sample_id);
            wire::put_u32(sink, b.lane);
            wire::put_bytes(sink, b.path);
            wire::put_u64(sink, b.byte_length);
            wire::put_u8(sink, static_cast<std::uint8_t>(b.format));
        });
    }

    // Row writers double as the storage-report byte math.

    template <typename Sink>
    void write_read_row(Sink& sink, const ShortRead& r, codec::SeqCodec seq_mode) const {
        wire::put_u64(sink, r.read_id);
        wire::put_u64(sink, r.sample.experiment_id);
        wire::put_u64(sink, r.sample.sample_group_id);
        wire::put_u64(sink, r.sample.sample_id);
        wire::put_u64(sink, run_id_for(r.coords.instrument, r.coords.flowcell));
        wire::put_u32(sink, r.coords.lane);
        wire::put_u32(sink, r.coords.tile);
        wire::put_u32(sink, r.coords.x);
        wire::put_u32(sink, r.coords.y);
        write_seq_column(sink, r.seq, seq_mode);
        const auto& scores = r.qual.scores();
        wire::put_bytes(sink, std::string_view(reinterpret_cast<const char*>(scores.data()),
                                               scores.size()));
    }

    template <typename Sink>
    static void write_1to1_row(Sink& sink, const OneToOneRead& r) {
        wire::put_u64(sink, r.row_id);
        wire::put_u64(sink, r.sample.experiment_id);
        wire::put_u64(sink, r.sample.sample_group_id);
        wire::put_u64(sink, r.sample.sample_id);
        wire::put_u32(sink, r.lane);
        wire::put_bytes(sink, r.name);
        wire::put_bytes(sink, r.seq_text);
        wire::put_bytes(sink, r.plus);
        wire::put_bytes(sink, r.qual_text);
    }

    template <typename Sink>
    static void write_tag_row(Sink& sink, const Tag& t, codec::SeqCodec seq_mode) {
        wire::put_u64(sink, t.tag_id);
        wire::put_u64(sink, t.sample.experiment_id);
        wire::put_u64(sink, t.sample.sample_group_id);
        wire::put_u64(sink, t.sample.sample_id);
        wire::put_u32(sink, t.frequency);
        wire::put_u32(sink, t.rank);
        write_seq_column(sink, t.seq, seq_mode);
    }

    template <typename Sink>
    static void write_reference_row(Sink& sink, const ReferenceSequence& r,
                                    codec::SeqCodec seq_mode) {
        wire::put_u64(sink, r.ref_id);
        wire::put_bytes(sink, r.name);
        write_seq_column(sink, r.seq, seq_mode);
    }

    template <typename Sink>
    static void write_alignment_row(Sink& sink, const Alignment& a) {
        wire::put_u64(sink, a.alignment_id);
        wire::put_u64(sink, a.sample.experiment_id);
        wire::put_u64(sink, a.sample.sample_group_id);
        wire::put_u64(sink, a.sample.sample_id);
        wire::put_u64(sink, a.subject_id);
        wire::put_u64(sink, a.gene_id);
        wire::put_u64(sink, a.pos);
        wire::put_u8(sink, static_cast<std::uint8_t>(a.strand));
    }

    template <typename Sink>
    static void write_expression_row(Sink& sink, const GeneExpression& e) {
        wire::put_u64(sink, e.gene_id);
        wire::put_u64(sink, e.sample.experiment_id);
        wire::put_u64(sink, e.sample.sample_group_id);
        wire::put_u64(sink, e.sample.sample_id);
        wire::put_u64(sink, e.total_frequency);
        wire::put_u32(sink, e.tag_count);
    }

    // The seq column: plain length-prefixed text, or the self-describing
    // encoded form (packed2bit with text fallback for N-heavy rows). In
    // blockdict mode the column is omitted from the row; the batch codec
    // stores it per block.
    template <typename Sink>
    static void write_seq_column(Sink& sink, const Sequence& seq, codec::SeqCodec mode) {
        switch (mode) {
        case codec::SeqCodec::text: wire::put_bytes(sink, seq.str()); break;
        case codec::SeqCodec::packed2bit: wire::put_encoded_seq(sink, codec::encode_sequence(seq)); break;
        case codec::SeqCodec::blockdict: break;
        }
    }

private:
    static void ensure_dense(std::string_view what, std::size_t have, SurrogateId want) {
        if (want > have + 1)
            throw DataError(std::string(what) + " id " + std::to_string(want) +
                            " would leave a gap; next id is " + std::to_string(have + 1));
    }

    static std::string run_key(std::string_view instrument, std::string_view flowcell) {
        std::string k(instrument);
        k.push_back('\x1f');
        k.append(flowcell);
        return k;
    }

    static std::string coord_key(const SampleKey& s, const ReadCoordinates& c) {
        return std::to_string(s.experiment_id) + ':' + std::to_string(s.sample_group_id) + ':' +
               std::to_string(s.sample_id) + ':' + c.to_name();
    }

    static SurrogateId parse_number(std::string_view s, std::string_view what) {
        if (s.empty() || s.size() > 19) throw DataError("bad " + std::string(what));
        std::uint64_t v = 0;
        for (char c : s) {
            if (c < '0' || c > '9') throw DataError("bad " + std::string(what));
            v = v * 10 + static_cast<std::uint64_t>(c - '0');
        }
        return v;
    }

    SurrogateId intern_run(std::string_view instrument, std::string_view flowcell) {
        const std::string key = run_key(instrument, flowcell);
        const auto it = run_index_.find(key);
        if (it != run_index_.end()) return it->second;
        const SurrogateId id = runs_.size() + 1;
        runs_.push_back({id, std::string(instrument), std::string(flowcell)});
        run_index_.emplace(key, id);
        return id;
    }

    static Guid hash_file(const std::filesystem::path& path, const SampleKey& sample,
                          std::uint32_t lane) {
        // streamed 64-bit FNV-1a over the content, twice with different
        // offsets, mixed with the registration key
        std::uint64_t h1 = 1469598103934665603ULL, h2 = 1099511628211ULL ^ 0x5bd1e995;
        std::ifstream in(path, std::ios::binary);
        if (!in.is_open()) throw IoError("cannot open file: " + path.string());
        std::vector<char> buf(1 << 16);
        for (;;) {
            in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
            const auto got = static_cast<std::size_t>(in.gcount());
            if (got == 0) break;
            for (std::size_t i = 0; i < got; ++i) {
                h1 = (h1 ^ static_cast<std::uint8_t>(buf[i])) * 1099511628211ULL;
                h2 = (h2 ^ static_cast<std::uint8_t>(buf[i])) * 0x100000001b3ULL + 0x9e3779b9;
            }
            if (in.eof()) break;
        }
        auto mix = [](std::uint64_t h, std::uint64_t v) {
            h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            return h * 1099511628211ULL;
        };
        h1 = mix(h1, sample.experiment_id);
        h1 = mix(h1, sample.sample_group_id);
        h2 = mix(h2, sample.sample_id);
        h2 = mix(h2, lane);
        Guid g;
        for (int i = 0; i < 8; ++i) g.bytes[static_cast<std::size_t>(i)] = std::uint8_t(h1 >> (8 * i));
        for (int i = 0; i < 8; ++i) g.bytes[static_cast<std::size_t>(8 + i)] = std::uint8_t(h2 >> (8 * i));
        return g;
    }

    template <typename T, typename WriteRow>
    void save_catalog(const char* name, const std::vector<T>& rows, std::size_t& persisted,
                      WriteRow&& write_row) {
        if (persisted > rows.size())
            throw Error("catalog " + std::string(name) + " shrank since last save");
        if (persisted == rows.size()) return;
        std::ofstream out(dir_ / "catalog" / (std::string(name) + ".dat"),
                          std::ios::binary | std::ios::app);
        if (!out.is_open()) throw IoError("cannot open catalog file for append: " + std::string(name));
        wire::StreamSink sink{out};
        for (std::size_t i = persisted; i < rows.size(); ++i) write_row(sink, rows[i]);
        if (!out) throw IoError("write failure on catalog " + std::string(name));
        persisted = rows.size();
    }

    std::string read_catalog_file(const char* name) {
        std::ifstream in(dir_ / "catalog" / (std::string(name) + ".dat"), std::ios::binary);
        if (!in.is_open()) return {};
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return data;
    }

    void load() {
        {
            const auto data = read_catalog_file("experiments");
            wire::Reader r(data);
            while (!r.done()) {
                Experiment e;
                e.id = r.u64();
                e.name = std::string(r.bytes());
                experiments_.push_back(std::move(e));
            }
            persisted_.experiments = experiments_.size();
        }
        {
            const auto data = read_catalog_file("sample_groups");
            wire::Reader r(data);
            while (!r.done()) {
                SampleGroup g;
                g.id = r.u64();
                g.experiment_id = r.u64();
                g.name = std::string(r.bytes());
                sample_groups_.push_back(std::move(g));
            }
            persisted_.sample_groups = sample_groups_.size();
        }
        {
            const auto data = read_catalog_file("samples");
            wire::Reader r(data);
            while (!r.done()) {
                Sample s;
                s.id = r.u64();
                s.sample_group_id = r.u64();
                s.name = std::string(r.bytes());
                samples_.push_back(std::move(s));
            }
            persisted_.samples = samples_.size();
        }
        {
            const auto data = read_catalog_file("runs");
            wire::Reader r(data);
            while (!r.done()) {
                FlowcellRun run;
                run.id = r.u64();
                run.instrument = std::string(r.bytes());
                run.flowcell = std::string(r.bytes());
                run_index_.emplace(run_key(run.instrument, run.flowcell), run.id);
                runs_.push_back(std::move(run));
            }
            persisted_.runs = runs_.size();
        }
        {
            const auto data = read_catalog_file("reads");
            wire::Reader r(data);
            while (!r.done()) {
                ShortRead read;
                read.read_id = r.u64();
                read.sample.experiment_id = r.u64();
                read.sample.sample_group_id = r.u64();
                read.sample.sample_id = r.u64();
                const SurrogateId run_id = r.u64();
                if (run_id < 1 || run_id > runs_.size())
                    throw DataError("read row references unknown flowcell run " +
                                    std::to_string(run_id));
                read.coords.instrument = runs_[run_id - 1].instrument;
                read.coords.flowcell = runs_[run_id - 1].flowcell;
                read.coords.lane = r.u32();
                read.coords.tile = r.u32();
                read.coords.x = r.u32();
                read.coords.y = r.u32();
                read.seq = codec::decode_sequence(wire::get_encoded_seq(r));
                const auto qual = r.bytes();
                read.qual = QualityVector(
                    std::vector<std::uint8_t>(qual.begin(), qual.end()));
                reads_.push_back(std::move(read));
            }
            persisted_.reads = reads_.size();
        }
        {
            const auto data = read_catalog_file("reads_1to1");
            wire::Reader r(data);
            while (!r.done()) {
                OneToOneRead row;
                row.row_id = r.u64();
                row.sample.experiment_id = r.u64();
                row.sample.sample_group_id = r.u64();
                row.sample.sample_id = r.u64();
                row.lane = r.u32();
                row.name = std::string(r.bytes());
                row.seq_text = std::string(r.bytes());
                row.plus = std::string(r.bytes());
                row.qual_text = std::string(r.bytes());
                reads_1to1_.push_back(std::move(row));
            }
            persisted_.reads_1to1 = reads_1to1_.size();
        }
        {
            const auto data = read_catalog_file("tags");
            wire::Reader r(data);
            while (!r.done()) {
                Tag t;
                t.tag_id = r.u64();
                t.sample.experiment_id = r.u64();
                t.sample.sample_group_id = r.u64();
                t.sample.sample_id = r.u64();
                t.frequency = r.u32();
                t.rank = r.u32();
                t.seq = codec::decode_sequence(wire::get_encoded_seq(r));
                tags_.push_back(std::move(t));
            }
            persisted_.tags = tags_.size();
        }
        {
            const auto data = read_catalog_file("references");
            wire::Reader r(data);
            while (!r.done()) {
                ReferenceSequence ref;
                ref.ref_id = r.u64();
                ref.name = std::string(r.bytes());
                ref.seq = codec::decode_sequence(wire::get_encoded_seq(r));
                ref_name_index_.emplace(ref.name, ref.ref_id);
                references_.push_back(std::move(ref));
            }
            persisted_.references = references_.size();
        }
        {
            const auto data = read_catalog_file("alignments");
            wire::Reader r(data);
            while (!r.done()) {
                Alignment a;
                a.alignment_id = r.u64();
                a.sample.experiment_id = r.u64();
                a.sample.sample_group_id = r.u64();
                a.sample.sample_id = r.u64();
                a.subject_id = r.u64();
                a.gene_id = r.u64();
                a.pos = r.u64();
                a.strand = static_cast<Strand>(r.u8());
                alignments_.push_back(a);
            }
            persisted_.alignments = alignments_.size();
        }
        {
            const auto data = read_catalog_file("expressions");
            wire::Reader r(data);
            while (!r.done()) {
                GeneExpression e;
                e.gene_id = r.u64();
                e.sample.experiment_id = r.u64();
                e.sample.sample_group_id = r.u64();
                e.sample.sample_id = r.u64();
                e.total_frequency = r.u64();
                e.tag_count = r.u32();
                expressions_.push_back(e);
            }
            persisted_.expressions = expressions_.size();
        }
        {
            const auto data = read_catalog_file("blobs");
            wire::Reader r(data);
            while (!r.done()) {
                BlobEntry b;
                const auto raw = r.take(16);
                std::copy(raw.begin(), raw.end(), reinterpret_cast<char*>(b.guid.bytes.data()));
                b.sample.experiment_id = r.u64();
                b.sample.sample_group_id = r.u64();
                b.sample.sample_id = r.u64();
                b.lane = r.u32();
                b.path = std::string(r.bytes());
                b.byte_length = r.u64();
                b.format = static_cast<BlobFormat>(r.u8());
                guid_index_.emplace(b.guid.to_string(), blobs_.size());
                blobs_.push_back(std::move(b));
            }
            persisted_.blobs = blobs_.size();
        }
        // rebuild derived state for the normalized reads
        for (const auto& read : reads_) {
            intern_run(read.coords.instrument, read.coords.flowcell);
            coord_index_.insert(coord_key(read.sample, read.coords));
        }
    }

    struct PersistedCounts {
        std::size_t experiments = 0, sample_groups = 0, samples = 0, runs = 0, reads = 0,
                    reads_1to1 = 0, tags = 0, references = 0, alignments = 0, expressions = 0,
                    blobs = 0;
    };

    std::vector<Experiment> experiments_;
    std::vector<SampleGroup> sample_groups_;
    std::vector<Sample> samples_;
    std::vector<FlowcellRun> runs_;
    std::vector<ShortRead> reads_;
    std::vector<OneToOneRead> reads_1to1_;
    std::vector<Tag> tags_;
    std::vector<ReferenceSequence> references_;
    std::vector<Alignment> alignments_;
    std::vector<GeneExpression> expressions_;
    std::vector<BlobEntry> blobs_;

    std::unordered_map<std::string, SurrogateId> run_index_;
    std::unordered_map<std::string, SurrogateId> ref_name_index_;
    std::unordered_set<std::string> coord_index_;
    std::unordered_map<std::string, std::size_t> guid_index_;

    std::filesystem::path dir_;
    PersistedCounts persisted_;
};

}  // namespace seqdb::store
