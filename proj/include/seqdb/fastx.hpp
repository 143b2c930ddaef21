#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqdb/core.hpp"

namespace seqdb::fastx {

// ---------------------------------------------------------------------------
// Byte sources
// ---------------------------------------------------------------------------

/// Pull-style byte stream. read() fills up to `max` bytes and returns the
/// number filled; 0 means end of source.
class ByteSource {
public:
    virtual ~ByteSource() = default;
    virtual std::size_t read(char* dst, std::size_t max) = 0;
};

class FileSource final : public ByteSource {
public:
    explicit FileSource(const std::filesystem::path& path)
        : path_(path.string()), in_(path, std::ios::binary) {
        if (!in_.is_open())
            throw IoError("cannot open file: " + path_);
    }

    std::size_t read(char* dst, std::size_t max) override {
        in_.read(dst, static_cast<std::streamsize>(max));
        const auto got = static_cast<std::size_t>(in_.gcount());
        if (in_.bad())
            throw IoError("read failure on " + path_, consumed_);
        consumed_ += got;
        return got;
    }

private:
    std::string path_;
    std::ifstream in_;
    std::uint64_t consumed_ = 0;
};

class MemorySource final : public ByteSource {
public:
    explicit MemorySource(std::string data) : data_(std::move(data)) {}

    std::size_t read(char* dst, std::size_t max) override {
        const std::size_t n = std::min(max, data_.size() - pos_);
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
        return n;
    }

private:
    std::string data_;
    std::size_t pos_ = 0;
};

inline constexpr std::size_t kDefaultBufferSize = 64 * 1024;
// Floor for the library itself; the CLI enforces its own 1 KiB minimum.
inline constexpr std::size_t kMinBufferSize = 16;

// ---------------------------------------------------------------------------
// Chunked reading
// ---------------------------------------------------------------------------

/// Buffer-paging state shared by the record readers. The source is consumed
/// in chunks of at most the buffer size; an entry that straddles a chunk
/// boundary is moved to the start of the buffer and the remainder of the
/// buffer is filled with the next chunk.
///
/// Invariants: 0 <= buffer_pos <= bytes_read <= buffer size, and file_pos
/// equals the total bytes consumed from the source.
class ChunkedReaderBase {
public:
    ChunkedReaderBase(std::unique_ptr<ByteSource> source, std::size_t buffer_size)
        : source_(std::move(source)) {
        if (buffer_size < kMinBufferSize)
            throw std::invalid_argument("buffer size below minimum of " +
                                        std::to_string(kMinBufferSize) + " bytes");
        buffer_.resize(buffer_size);
        bytes_read_ = read_chunk();
    }

    std::uint64_t file_pos() const noexcept { return file_pos_; }

protected:
    /// Fills the buffer after any carried-over partial entry. Returns the
    /// number of valid bytes in the buffer (carry included), 0 only at end
    /// of source.
    std::size_t read_chunk() {
        const std::size_t len = buffer_.size() - buffer_offset_;
        std::size_t got = source_->read(buffer_.data() + buffer_offset_, len);
        file_pos_ += got;
        buffer_pos_ = 0;
        if (got > 0 && buffer_offset_ > 0) {
            got += buffer_offset_;
            buffer_offset_ = 0;
        }
        return got;
    }

    /// Moves the unconsumed tail [buffer_pos_, bytes_read_) to the buffer
    /// start so the next chunk can be appended after it.
    void carry_tail() {
        const std::size_t tail = bytes_read_ - buffer_pos_;
        if (tail > 0 && buffer_pos_ > 0)
            std::memmove(buffer_.data(), buffer_.data() + buffer_pos_, tail);
        buffer_offset_ = tail;
        buffer_pos_ = bytes_read_;  // triggers the next read_chunk()
    }

    /// File offset of the byte at buffer index i.
    std::uint64_t offset_of(std::size_t i) const noexcept {
        return file_pos_ - bytes_read_ + i;
    }

    std::unique_ptr<ByteSource> source_;
    std::vector<char> buffer_;
    std::uint64_t file_pos_ = 0;   // bytes consumed from the source
    std::size_t buffer_pos_ = 0;   // next unparsed byte
    std::size_t buffer_offset_ = 0;  // carried partial-entry length
    std::size_t bytes_read_ = 0;   // valid bytes in the buffer
};

// ---------------------------------------------------------------------------
// FASTQ
// ---------------------------------------------------------------------------

/// One 4-line FASTQ record. `plus` is the text after the '+' separator; it
/// is kept verbatim (often a repeat of the name) but never validated.
struct FastqRecord {
    std::string name;
    Sequence seq;
    QualityVector qual;
    std::string plus;

    bool operator==(const FastqRecord& o) const {
        return name == o.name && seq == o.seq && qual == o.qual && plus == o.plus;
    }
    bool operator!=(const FastqRecord& o) const { return !(*this == o); }
};

/// Streaming FASTQ reader. Records are yielded lazily in file order; the
/// source is consumed in chunks of at most the buffer size. A record larger
/// than the buffer is a hard error (FASTA is the format for multi-chunk
/// entries).
class FastqReader : public ChunkedReaderBase {
public:
    FastqReader(std::unique_ptr<ByteSource> source, std::size_t buffer_size = kDefaultBufferSize)
        : ChunkedReaderBase(std::move(source), buffer_size) {}

    /// Next record, or nullopt at end of stream.
    std::optional<FastqRecord> next() {
        if (done_) return std::nullopt;
        while (bytes_read_ > 0) {
            while (buffer_pos_ < bytes_read_ &&
                   (buffer_[buffer_pos_] == '\n' || buffer_[buffer_pos_] == '\r'))
                ++buffer_pos_;
            if (buffer_pos_ >= bytes_read_) {
                bytes_read_ = read_chunk();
                if (bytes_read_ == 0) break;
                continue;
            }
            FastqRecord rec;
            const std::size_t consumed = parse_entry(buffer_pos_, bytes_read_, false, rec);
            if (consumed > 0) {
                buffer_pos_ += consumed;
                ++yielded_;
                return rec;
            }
            if (bytes_read_ - buffer_pos_ == buffer_.size())
                throw_capacity_error();
            carry_tail();
        }
        return finalize_eof();
    }

    /// Count of records yielded so far.
    std::uint64_t records_yielded() const noexcept { return yielded_; }

private:
    std::optional<FastqRecord> finalize_eof() {
        done_ = true;
        if (buffer_offset_ == 0) return std::nullopt;
        FastqRecord rec;
        const std::size_t consumed = parse_entry(0, buffer_offset_, true, rec);
        const std::size_t leftover = buffer_offset_ - consumed;
        buffer_offset_ = 0;
        if (consumed == 0) return std::nullopt;  // only blank bytes remained
        if (leftover != 0)
            throw ParseError("trailing bytes after final record", file_pos_ - leftover,
                             yielded_ + 2);
        ++yielded_;
        return rec;
    }

    // Parses one entry starting at `from`. Returns bytes consumed, or 0 if
    // the entry is incomplete (or, in final mode, if only blank lines
    // remain). Throws ParseError on malformed input.
    std::size_t parse_entry(std::size_t from, std::size_t end, bool final_mode, FastqRecord& out) {
        std::size_t pos = from;
        while (pos < end && (buffer_[pos] == '\n' || buffer_[pos] == '\r')) ++pos;
        if (pos >= end) return 0;
        const std::uint64_t entry_offset = final_mode ? file_pos_ - (end - pos) : offset_of(pos);
        const std::uint64_t ordinal = yielded_ + 1;

        std::string_view lines[4];
        std::size_t cursor = pos;
        for (int i = 0; i < 4; ++i) {
            const auto nl = find_line_end(cursor, end);
            if (!nl) {
                if (!final_mode) return 0;  // entry straddles the chunk boundary
                if (i < 3 || cursor >= end)
                    throw ParseError("truncated record at end of input", entry_offset, ordinal);
                lines[i] = line_view(cursor, end);
                cursor = end;
                break;
            }
            lines[i] = line_view(cursor, *nl);
            cursor = *nl + 1;
        }

        if (lines[0].empty() || lines[0][0] != '@')
            throw ParseError("expected '@' at start of record", entry_offset, ordinal);
        if (lines[2].empty() || lines[2][0] != '+')
            throw ParseError("expected '+' separator line", entry_offset, ordinal);

        std::string seq;
        seq.reserve(lines[1].size());
        for (std::size_t i = 0; i < lines[1].size(); ++i) {
            const char b = normalize_base(lines[1][i]);
            if (b == '\0')
                throw ParseError(std::string("illegal symbol '") + lines[1][i] + "' in sequence",
                                 entry_offset, ordinal);
            seq.push_back(b);
        }
        if (lines[3].size() != seq.size())
            throw ParseError("quality length " + std::to_string(lines[3].size()) +
                                 " does not match sequence length " + std::to_string(seq.size()),
                             entry_offset, ordinal);

        out.name.assign(lines[0].substr(1));
        out.plus.assign(lines[2].substr(1));
        out.seq = Sequence(std::move(seq));
        try {
            out.qual = QualityVector::from_phred33(lines[3]);
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what(), entry_offset, ordinal);
        }
        return cursor - from;
    }

    std::optional<std::size_t> find_line_end(std::size_t from, std::size_t end) const {
        const char* p = static_cast<const char*>(
            std::memchr(buffer_.data() + from, '\n', end - from));
        if (!p) return std::nullopt;
        return static_cast<std::size_t>(p - buffer_.data());
    }

    // Line content [from, to) with a trailing '\r' stripped.
    std::string_view line_view(std::size_t from, std::size_t to) const {
        std::size_t len = to - from;
        if (len > 0 && buffer_[from + len - 1] == '\r') --len;
        return std::string_view(buffer_.data() + from, len);
    }

    // The whole buffer holds one incomplete entry; scan forward through the
    // source to name the size the record actually needs.
    [[noreturn]] void throw_capacity_error() {
        const std::uint64_t entry_offset = offset_of(buffer_pos_);
        const std::uint64_t ordinal = yielded_ + 1;
        std::uint64_t span = bytes_read_ - buffer_pos_;
        int newlines = 0;
        for (std::size_t i = buffer_pos_; i < bytes_read_; ++i)
            if (buffer_[i] == '\n') ++newlines;
        bool found_end = false;
        while (!found_end) {
            const std::size_t got = source_->read(buffer_.data(), buffer_.size());
            if (got == 0) break;
            for (std::size_t i = 0; i < got; ++i) {
                ++span;
                if (buffer_[i] == '\n' && ++newlines == 4) {
                    found_end = true;
                    break;
                }
            }
        }
        throw CapacityError("record " + std::to_string(ordinal) + " at byte offset " +
                                std::to_string(entry_offset) + " requires " +
                                (found_end ? "" : "at least ") + std::to_string(span) +
                                " bytes but the buffer holds " + std::to_string(buffer_.size()),
                            entry_offset, ordinal, span);
    }

    std::uint64_t yielded_ = 0;
    bool done_ = false;
};

// ---------------------------------------------------------------------------
// FASTA
// ---------------------------------------------------------------------------

struct FastaRecord {
    std::string name;
    Sequence seq;

    bool operator==(const FastaRecord& o) const { return name == o.name && seq == o.seq; }
    bool operator!=(const FastaRecord& o) const { return !(*this == o); }
};

/// Streaming FASTA reader. Sequences may span many lines and a single
/// record may exceed the buffer size: sequence bytes are accumulated
/// incrementally, so the buffer bounds only the chunk, never the record.
class FastaReader : public ChunkedReaderBase {
public:
    FastaReader(std::unique_ptr<ByteSource> source, std::size_t buffer_size = kDefaultBufferSize)
        : ChunkedReaderBase(std::move(source), buffer_size) {}

    std::optional<FastaRecord> next() {
        if (done_) return std::nullopt;
        while (bytes_read_ > 0) {
            if (buffer_pos_ >= bytes_read_) {
                bytes_read_ = read_chunk();
                if (bytes_read_ == 0) break;
            }
            if (auto rec = consume_buffer()) {
                ++yielded_;
                return rec;
            }
        }
        return finalize_eof();
    }

    std::uint64_t records_yielded() const noexcept { return yielded_; }

private:
    // Consumes buffered bytes, returning a record when the next header (or
    // nothing, if more input is needed) closes the current one.
    std::optional<FastaRecord> consume_buffer() {
        while (buffer_pos_ < bytes_read_) {
            const char c = buffer_[buffer_pos_];
            if (at_line_start_ && c == '>') {
                const auto nl = find_line_end(buffer_pos_, bytes_read_);
                if (!nl) {
                    if (bytes_read_ - buffer_pos_ == buffer_.size())
                        throw ParseError("header line exceeds buffer capacity of " +
                                             std::to_string(buffer_.size()) + " bytes",
                                         offset_of(buffer_pos_), yielded_ + 1);
                    carry_tail();
                    return std::nullopt;
                }
                std::string_view header = line_view(buffer_pos_ + 1, *nl);
                std::optional<FastaRecord> finished;
                if (in_record_)
                    finished = take_current();
                in_record_ = true;
                name_.assign(header);
                seq_.clear();
                buffer_pos_ = *nl + 1;
                if (finished) return finished;
                continue;
            }
            if (!in_record_) {
                if (c == '\n' || c == '\r') {  // blank leading lines
                    ++buffer_pos_;
                    at_line_start_ = (c == '\n');
                    continue;
                }
                throw ParseError("expected '>' at start of record", offset_of(buffer_pos_),
                                 yielded_ + 1);
            }
            consume_sequence_bytes();
        }
        return std::nullopt;
    }

    // Appends sequence bytes up to the next header or buffer end. Partial
    // lines are consumed immediately; only a trailing '\r' is held back in
    // case it precedes a '\n' in the next chunk.
    void consume_sequence_bytes() {
        while (buffer_pos_ < bytes_read_) {
            const char c = buffer_[buffer_pos_];
            if (c == '\n') {
                at_line_start_ = true;
                ++buffer_pos_;
                continue;
            }
            if (at_line_start_ && c == '>') return;
            if (c == '\r') {
                if (buffer_pos_ + 1 == bytes_read_) {
                    carry_tail();  // may pair with '\n' in the next chunk
                    return;
                }
                if (buffer_[buffer_pos_ + 1] == '\n') {
                    at_line_start_ = true;
                    buffer_pos_ += 2;
                    continue;
                }
                throw ParseError("stray carriage return in sequence", offset_of(buffer_pos_),
                                 yielded_ + 1);
            }
            const char b = normalize_base(c);
            if (b == '\0')
                throw ParseError(std::string("illegal symbol '") + c + "' in sequence",
                                 offset_of(buffer_pos_), yielded_ + 1);
            seq_.push_back(b);
            at_line_start_ = false;
            ++buffer_pos_;
        }
    }

    std::optional<FastaRecord> finalize_eof() {
        done_ = true;
        if (buffer_offset_ > 0) {
            // A carried tail at end of source is either a final header with
            // no newline or a lone '\r'.
            const std::size_t end = buffer_offset_;
            buffer_offset_ = 0;
            if (buffer_[0] == '>') {
                std::string_view header = line_view(1, end);
                std::optional<FastaRecord> finished;
                if (in_record_) finished = take_current();
                in_record_ = true;
                name_.assign(header);
                seq_.clear();
                if (finished) {
                    ++yielded_;
                    done_ = false;  // the carried header still needs emitting
                    bytes_read_ = 0;
                    buffer_pos_ = 0;
                    return finished;
                }
            } else if (buffer_[0] != '\r' || end != 1) {
                throw ParseError("truncated record at end of input", file_pos_ - end,
                                 yielded_ + 1);
            }
        }
        if (in_record_) {
            in_record_ = false;
            done_ = true;
            ++yielded_;
            return take_current();
        }
        done_ = true;
        return std::nullopt;
    }

    FastaRecord take_current() {
        FastaRecord rec;
        rec.name = std::move(name_);
        rec.seq = Sequence(std::move(seq_));
        name_.clear();
        seq_.clear();
        in_record_ = false;
        return rec;
    }

    std::optional<std::size_t> find_line_end(std::size_t from, std::size_t end) const {
        const char* p = static_cast<const char*>(
            std::memchr(buffer_.data() + from, '\n', end - from));
        if (!p) return std::nullopt;
        return static_cast<std::size_t>(p - buffer_.data());
    }

    std::string_view line_view(std::size_t from, std::size_t to) const {
        std::size_t len = to - from;
        if (len > 0 && buffer_[from + len - 1] == '\r') --len;
        return std::string_view(buffer_.data() + from, len);
    }

    std::string name_;
    std::string seq_;
    bool in_record_ = false;
    bool at_line_start_ = true;
    std::uint64_t yielded_ = 0;
    bool done_ = false;
};

// ---------------------------------------------------------------------------
// Open helpers
// ---------------------------------------------------------------------------

inline FastqReader open_fastq(std::unique_ptr<ByteSource> source,
                              std::size_t buffer_size = kDefaultBufferSize) {
    return FastqReader(std::move(source), buffer_size);
}

inline FastqReader open_fastq(const std::filesystem::path& path,
                              std::size_t buffer_size = kDefaultBufferSize) {
    return FastqReader(std::make_unique<FileSource>(path), buffer_size);
}

inline FastaReader open_fasta(std::unique_ptr<ByteSource> source,
                              std::size_t buffer_size = kDefaultBufferSize) {
    return FastaReader(std::move(source), buffer_size);
}

inline FastaReader open_fasta(const std::filesystem::path& path,
                              std::size_t buffer_size = kDefaultBufferSize) {
    return FastaReader(std::make_unique<FileSource>(path), buffer_size);
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

/// Canonical FASTQ serialization; parse(write(x)) == x. Returns bytes written.
inline std::uint64_t write_fastq(std::span<const FastqRecord> records, std::ostream& out) {
    std::uint64_t bytes = 0;
    std::string line;
    for (const auto& r : records) {
        line.clear();
        line.push_back('@');
        line += r.name;
        line.push_back('\n');
        line += r.seq.str();
        line.push_back('\n');
        line.push_back('+');
        line += r.plus;
        line.push_back('\n');
        line += r.qual.to_phred33();
        line.push_back('\n');
        out.write(line.data(), static_cast<std::streamsize>(line.size()));
        bytes += line.size();
    }
    if (!out) throw IoError("write failure", bytes);
    return bytes;
}

inline std::uint64_t write_fastq_record(const FastqRecord& r, std::ostream& out) {
    return write_fastq(std::span<const FastqRecord>(&r, 1), out);
}

/// Canonical FASTA serialization with sequence lines wrapped at line_width
/// (0 = no wrapping). Returns bytes written.
inline std::uint64_t write_fasta(std::span<const FastaRecord> records, std::ostream& out,
                                 std::size_t line_width = 60) {
    std::uint64_t bytes = 0;
    for (const auto& r : records) {
        out.put('>');
        out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        out.put('\n');
        bytes += r.name.size() + 2;
        const std::string& s = r.seq.str();
        const std::size_t width = line_width == 0 ? (s.empty() ? 1 : s.size()) : line_width;
        for (std::size_t i = 0; i < s.size(); i += width) {
            const std::size_t n = std::min(width, s.size() - i);
            out.write(s.data() + i, static_cast<std::streamsize>(n));
            out.put('\n');
            bytes += n + 1;
        }
    }
    if (!out) throw IoError("write failure", bytes);
    return bytes;
}

inline std::uint64_t write_fasta_record(const FastaRecord& r, std::ostream& out,
                                        std::size_t line_width = 60) {
    return write_fasta(std::span<const FastaRecord>(&r, 1), out, line_width);
}

}  // namespace seqdb::fastx
