#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqdb/core.hpp"

namespace seqdb::codec {

enum class SeqCodec : std::uint8_t { text = 0, packed2bit = 1, blockdict = 2 };

/// A sequence in one of the per-row storage representations. For
/// packed2bit, `n_exceptions` lists the 1-based positions holding 'N'
/// (encoded as 'A' inside the payload, since 2-bit packing alone can never
/// produce an N).
struct EncodedSequence {
    SeqCodec codec = SeqCodec::text;
    std::uint32_t original_length = 0;
    std::vector<std::uint8_t> payload;
    std::vector<std::uint32_t> n_exceptions;

    bool operator==(const EncodedSequence& o) const {
        return codec == o.codec && original_length == o.original_length && payload == o.payload &&
               n_exceptions == o.n_exceptions;
    }
};

// ---------------------------------------------------------------------------
// packed2bit: A=00 C=01 G=10 T=11, four bases per byte, first base in the
// high bits, final byte zero-padded. Payload is exactly ceil(len/4) bytes.
// ---------------------------------------------------------------------------

inline EncodedSequence encode_packed2bit(const Sequence& seq) {
    EncodedSequence e;
    e.codec = SeqCodec::packed2bit;
    e.original_length = static_cast<std::uint32_t>(seq.length());
    e.payload.assign((seq.length() + 3) / 4, 0);
    for (std::size_t i = 0; i < seq.length(); ++i) {
        unsigned code = base_code(seq[i]);
        if (code == 4) {
            if (seq[i] != 'N')
                throw std::invalid_argument("packed2bit requires A/C/G/T/N input");
            e.n_exceptions.push_back(static_cast<std::uint32_t>(i + 1));
            code = 0;  // stored as 'A'; the exception restores the N
        }
        e.payload[i / 4] |= static_cast<std::uint8_t>(code << (6 - 2 * (i % 4)));
    }
    return e;
}

inline Sequence decode_packed2bit(const EncodedSequence& e) {
    if (e.codec != SeqCodec::packed2bit)
        throw std::invalid_argument("not a packed2bit sequence");
    std::string out;
    out.resize(e.original_length);
    for (std::size_t i = 0; i < e.original_length; ++i)
        out[i] = base_from_code((e.payload[i / 4] >> (6 - 2 * (i % 4))) & 0x3u);
    for (std::uint32_t pos : e.n_exceptions)
        out[pos - 1] = 'N';
    return Sequence(std::move(out));
}

inline EncodedSequence encode_text(const Sequence& seq) {
    EncodedSequence e;
    e.codec = SeqCodec::text;
    e.original_length = static_cast<std::uint32_t>(seq.length());
    e.payload.assign(seq.str().begin(), seq.str().end());
    return e;
}

inline Sequence decode_text(const EncodedSequence& e) {
    return Sequence(std::string(e.payload.begin(), e.payload.end()));
}

/// Chooses the row codec: packed2bit unless more than a quarter of the
/// bases are N, in which case the exception list would outgrow the packing
/// gain and the text codec is used instead.
inline EncodedSequence encode_sequence(const Sequence& seq) {
    std::size_t n_count = 0;
    for (char c : seq)
        if (c == 'N') ++n_count;
    if (seq.length() > 0 && n_count * 4 > seq.length())
        return encode_text(seq);
    return encode_packed2bit(seq);
}

inline Sequence decode_sequence(const EncodedSequence& e) {
    switch (e.codec) {
    case SeqCodec::text: return decode_text(e);
    case SeqCodec::packed2bit: return decode_packed2bit(e);
    default: throw std::invalid_argument("blockdict sequences decode per batch");
    }
}

// ---------------------------------------------------------------------------
// blockdict: batch codec mirroring page-style compression. Rows are grouped
// into blocks of roughly block_size bytes of sequence text; each block
// factors out the longest common prefix and stores the remaining suffixes
// in a per-block dictionary of distinct values, with rows holding varint
// indexes into it.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDefaultBlockSize = 8 * 1024;  // one disk page of rows
inline constexpr std::size_t kMaxBlockRows = 4096;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw DataError("blockdict payload truncated");
    std::uint32_t v = in[pos] | (in[pos + 1] << 8) | (in[pos + 2] << 16) |
                      (static_cast<std::uint32_t>(in[pos + 3]) << 24);
    pos += 4;
    return v;
}

inline void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
    while (v >= 0x80) {
        out.push_back(static_cast<std::uint8_t>(v) | 0x80);
        v >>= 7;
    }
    out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint64_t get_varint(std::span<const std::uint8_t> in, std::size_t& pos) {
    std::uint64_t v = 0;
    int shift = 0;
    for (;;) {
        if (pos >= in.size()) throw DataError("blockdict payload truncated");
        const std::uint8_t b = in[pos++];
        v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
        if (!(b & 0x80)) return v;
        shift += 7;
        if (shift > 63) throw DataError("blockdict varint overflow");
    }
}

inline void encode_block(std::span<const std::string> rows, std::vector<std::uint8_t>& out) {
    // longest common prefix across the block
    std::size_t prefix_len = rows.empty() ? 0 : rows[0].size();
    for (const auto& r : rows) {
        std::size_t i = 0;
        const std::size_t limit = std::min(prefix_len, r.size());
        while (i < limit && r[i] == rows[0][i]) ++i;
        prefix_len = i;
        if (prefix_len == 0) break;
    }

    put_u32(out, static_cast<std::uint32_t>(rows.size()));
    put_u32(out, static_cast<std::uint32_t>(prefix_len));
    out.insert(out.end(), rows[0].begin(), rows[0].begin() + static_cast<std::ptrdiff_t>(prefix_len));

    // dictionary of distinct suffixes, first-occurrence order
    std::unordered_map<std::string_view, std::uint32_t> index;
    std::vector<std::string_view> dict;
    std::vector<std::uint32_t> refs;
    refs.reserve(rows.size());
    for (const auto& r : rows) {
        std::string_view suffix(r.data() + prefix_len, r.size() - prefix_len);
        auto [it, inserted] = index.try_emplace(suffix, static_cast<std::uint32_t>(dict.size()));
        if (inserted) dict.push_back(suffix);
        refs.push_back(it->second);
    }
    put_u32(out, static_cast<std::uint32_t>(dict.size()));
    for (auto s : dict) {
        put_u32(out, static_cast<std::uint32_t>(s.size()));
        out.insert(out.end(), s.begin(), s.end());
    }
    for (auto r : refs) put_varint(out, r);
}

}  // namespace detail

/// Encodes a batch of sequences into self-describing blocks. Lossless;
/// block_size bounds the sequence bytes grouped per block (>= 1 row each).
inline std::vector<std::uint8_t> encode_blockdict(std::span<const Sequence> seqs,
                                                  std::size_t block_size = kDefaultBlockSize) {
    if (block_size < 1) throw std::invalid_argument("block_size must be >= 1");
    std::vector<std::uint8_t> out;
    std::vector<std::string> rows;
    std::size_t pending_bytes = 0;
    std::vector<std::vector<std::string>> blocks;
    for (const auto& s : seqs) {
        rows.push_back(s.str());
        pending_bytes += s.length();
        if (pending_bytes >= block_size || rows.size() >= kMaxBlockRows) {
            blocks.push_back(std::move(rows));
            rows.clear();
            pending_bytes = 0;
        }
    }
    if (!rows.empty()) blocks.push_back(std::move(rows));

    detail::put_u32(out, static_cast<std::uint32_t>(blocks.size()));
    for (const auto& block : blocks) detail::encode_block(block, out);
    return out;
}

inline std::vector<Sequence> decode_blockdict(std::span<const std::uint8_t> payload) {
    std::size_t pos = 0;
    const std::uint32_t block_count = detail::get_u32(payload, pos);
    std::vector<Sequence> out;
    for (std::uint32_t b = 0; b < block_count; ++b) {
        const std::uint32_t row_count = detail::get_u32(payload, pos);
        const std::uint32_t prefix_len = detail::get_u32(payload, pos);
        if (pos + prefix_len > payload.size()) throw DataError("blockdict payload truncated");
        std::string prefix(reinterpret_cast<const char*>(payload.data() + pos), prefix_len);
        pos += prefix_len;
        const std::uint32_t dict_count = detail::get_u32(payload, pos);
        std::vector<std::string> dict(dict_count);
        for (auto& d : dict) {
            const std::uint32_t len = detail::get_u32(payload, pos);
            if (pos + len > payload.size()) throw DataError("blockdict payload truncated");
            d.assign(reinterpret_cast<const char*>(payload.data() + pos), len);
            pos += len;
        }
        for (std::uint32_t r = 0; r < row_count; ++r) {
            const std::uint64_t ref = detail::get_varint(payload, pos);
            if (ref >= dict.size()) throw DataError("blockdict dictionary reference out of range");
            out.emplace_back(prefix + dict[ref]);
        }
    }
    if (pos != payload.size()) throw DataError("blockdict payload has trailing bytes");
    return out;
}

}  // namespace seqdb::codec
