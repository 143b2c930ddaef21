#pragma once

#include <cinttypes>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "seqdb/codec.hpp"
#include "seqdb/store.hpp"

namespace seqdb::report {

/// Exact byte accounting of one store under every representation of the
/// design space: the original files, the blob registry (content by
/// reference), the 1:1 textual import, and the normalized schema with the
/// sequence column stored plain, block/dictionary-compressed, or 2-bit
/// packed. All numbers come from the defined wire serializations, so they
/// are reproducible to the byte.
struct StorageReport {
    struct CatalogLine {
        std::string name;
        std::uint64_t rows = 0;
        std::optional<std::uint64_t> raw;          // original/canonical file bytes
        std::optional<std::uint64_t> one_to_one;   // file-mimicking rows (reads only)
        std::uint64_t plain = 0;
        std::uint64_t blockdict = 0;
        std::uint64_t packed = 0;
    };

    std::vector<CatalogLine> catalogs;

    // Blob registry: recorded payload vs. filesystem truth at report time.
    std::uint64_t registered_file_bytes = 0;
    std::uint64_t blob_payload_bytes = 0;

    // Reads' sequence column in isolation, for the packing ratio.
    std::uint64_t reads_seq_text_bytes = 0;
    std::uint64_t reads_packed_payload_bytes = 0;

    std::uint64_t raw_total() const {
        std::uint64_t t = 0;
        for (const auto& c : catalogs) t += c.raw.value_or(0);
        return t;
    }
    std::uint64_t one_to_one_total() const {
        std::uint64_t t = 0;
        for (const auto& c : catalogs) t += c.one_to_one.value_or(0);
        return t;
    }
    std::uint64_t plain_total() const {
        std::uint64_t t = 0;
        for (const auto& c : catalogs) t += c.plain;
        return t;
    }
    std::uint64_t blockdict_total() const {
        std::uint64_t t = 0;
        for (const auto& c : catalogs) t += c.blockdict;
        return t;
    }
    std::uint64_t packed_total() const {
        std::uint64_t t = 0;
        for (const auto& c : catalogs) t += c.packed;
        return t;
    }

    const CatalogLine* find(std::string_view name) const {
        for (const auto& c : catalogs)
            if (c.name == name) return &c;
        return nullptr;
    }

    std::string to_table() const {
        std::string out;
        char line[256];
        std::snprintf(line, sizeof line, "%-16s %10s %12s %12s %12s %14s %12s\n", "catalog", "rows",
                      "raw", "1to1", "plain", "blockdict", "packed");
        out += line;
        auto cell = [](std::optional<std::uint64_t> v) {
            return v ? std::to_string(*v) : std::string("n/a");
        };
        for (const auto& c : catalogs) {
            std::snprintf(line, sizeof line, "%-16s %10" PRIu64 " %12s %12s %12" PRIu64
                          " %14" PRIu64 " %12" PRIu64 "\n",
                          c.name.c_str(), c.rows, cell(c.raw).c_str(), cell(c.one_to_one).c_str(),
                          c.plain, c.blockdict, c.packed);
            out += line;
        }
        std::snprintf(line, sizeof line, "%-16s %10s %12" PRIu64 " %12" PRIu64 " %12" PRIu64
                      " %14" PRIu64 " %12" PRIu64 "\n",
                      "total", "", raw_total(), one_to_one_total(), plain_total(),
                      blockdict_total(), packed_total());
        out += line;

        auto ratio = [](std::uint64_t num, std::uint64_t den) {
            return den == 0 ? std::string("n/a") : format_ratio(double(num) / double(den));
        };
        out += "\n";
        std::snprintf(line, sizeof line, "blob_registry/raw_files      %s (%" PRIu64 " / %" PRIu64
                      " bytes)\n",
                      ratio(blob_payload_bytes, registered_file_bytes).c_str(), blob_payload_bytes,
                      registered_file_bytes);
        out += line;
        if (const auto* reads = find("short_reads"); reads && reads->one_to_one) {
            std::snprintf(line, sizeof line, "normalized/1to1 (reads)      %s\n",
                          ratio(reads->plain, *reads->one_to_one).c_str());
            out += line;
        }
        std::snprintf(line, sizeof line, "packed_payload/seq_text      %s (%" PRIu64 " / %" PRIu64
                      " bytes)\n",
                      ratio(reads_packed_payload_bytes, reads_seq_text_bytes).c_str(),
                      reads_packed_payload_bytes, reads_seq_text_bytes);
        out += line;
        if (raw_total() > 0) {
            out += "\nratios vs raw files:\n";
            std::snprintf(line, sizeof line,
                          "  1to1=%s plain=%s blockdict=%s packed=%s\n",
                          ratio(one_to_one_total(), raw_total()).c_str(),
                          ratio(plain_total(), raw_total()).c_str(),
                          ratio(blockdict_total(), raw_total()).c_str(),
                          ratio(packed_total(), raw_total()).c_str());
            out += line;
        }
        return out;
    }

private:
    static std::string format_ratio(double r) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", r);
        return buf;
    }
};

namespace detail {

inline std::uint64_t digits(std::uint64_t v) {
    std::uint64_t d = 1;
    while (v >= 10) {
        v /= 10;
        ++d;
    }
    return d;
}

// Canonical serialization sizes, matching the writers bit for bit.

inline std::uint64_t fasta_bytes(std::size_t name_len, std::uint64_t seq_len,
                                 std::uint64_t width = 60) {
    std::uint64_t bytes = 1 + name_len + 1;  // '>' name '\n'
    if (seq_len > 0) bytes += seq_len + (seq_len + width - 1) / width;
    return bytes;
}

inline std::uint64_t tags_tsv_bytes(const store::Store& s) {
    std::uint64_t bytes = 24;  // "rank\tfrequency\tsequence\n"
    for (const auto& t : s.tags())
        bytes += digits(t.rank) + 1 + digits(t.frequency) + 1 + t.seq.length() + 1;
    return bytes;
}

inline std::uint64_t alignments_tsv_bytes(const store::Store& s) {
    std::uint64_t bytes = 0;
    for (const auto& a : s.alignments()) {
        const auto& ref_name = s.references()[a.gene_id - 1].name;
        bytes += digits(a.subject_id) + 1 + ref_name.size() + 1 + digits(a.pos) + 1 + 1 + 1;
    }
    return bytes;
}

inline std::uint64_t expressions_tsv_bytes(const store::Store& s) {
    std::uint64_t bytes = 34;  // "gene_id\ttotal_frequency\ttag_count\n"
    for (const auto& e : s.expressions())
        bytes += digits(e.gene_id) + 1 + digits(e.total_frequency) + 1 + digits(e.tag_count) + 1;
    return bytes;
}

}  // namespace detail

inline StorageReport compute_storage_report(const store::Store& s) {
    using wire::CountingSink;
    StorageReport rep;

    {
        StorageReport::CatalogLine meta;
        meta.name = "metadata";
        meta.rows = s.experiments().size() + s.sample_groups().size() + s.samples().size() +
                    s.runs().size();
        CountingSink sink;
        for (const auto& e : s.experiments()) {
            wire::put_u64(sink, e.id);
            wire::put_bytes(sink, e.name);
        }
        for (const auto& g : s.sample_groups()) {
            wire::put_u64(sink, g.id);
            wire::put_u64(sink, g.experiment_id);
            wire::put_bytes(sink, g.name);
        }
        for (const auto& x : s.samples()) {
            wire::put_u64(sink, x.id);
            wire::put_u64(sink, x.sample_group_id);
            wire::put_bytes(sink, x.name);
        }
        for (const auto& r : s.runs()) {
            wire::put_u64(sink, r.id);
            wire::put_bytes(sink, r.instrument);
            wire::put_bytes(sink, r.flowcell);
        }
        meta.plain = meta.blockdict = meta.packed = sink.bytes;
        rep.catalogs.push_back(std::move(meta));
    }

    {
        StorageReport::CatalogLine reads;
        reads.name = "short_reads";
        reads.rows = s.reads().size();

        std::uint64_t raw = 0;
        for (const auto& b : s.blobs())
            if (b.format == store::BlobFormat::fastq) raw += b.byte_length;
        if (raw > 0) reads.raw = raw;

        if (!s.reads_1to1().empty()) {
            CountingSink sink;
            for (const auto& r : s.reads_1to1()) store::Store::write_1to1_row(sink, r);
            reads.one_to_one = sink.bytes;
        }

        CountingSink plain, packed, rows_only;
        std::vector<Sequence> seqs;
        seqs.reserve(s.reads().size());
        for (const auto& r : s.reads()) {
            s.write_read_row(plain, r, codec::SeqCodec::text);
            s.write_read_row(packed, r, codec::SeqCodec::packed2bit);
            s.write_read_row(rows_only, r, codec::SeqCodec::blockdict);
            seqs.push_back(r.seq);
            rep.reads_seq_text_bytes += r.seq.length();
            const auto enc = codec::encode_sequence(r.seq);
            rep.reads_packed_payload_bytes += enc.payload.size();
        }
        reads.plain = plain.bytes;
        reads.packed = packed.bytes;
        reads.blockdict = rows_only.bytes + codec::encode_blockdict(seqs).size();
        rep.catalogs.push_back(std::move(reads));
    }

    {
        StorageReport::CatalogLine tags;
        tags.name = "unique_tags";
        tags.rows = s.tags().size();
        if (!s.tags().empty()) tags.raw = detail::tags_tsv_bytes(s);
        CountingSink plain, packed, rows_only;
        std::vector<Sequence> seqs;
        seqs.reserve(s.tags().size());
        for (const auto& t : s.tags()) {
            store::Store::write_tag_row(plain, t, codec::SeqCodec::text);
            store::Store::write_tag_row(packed, t, codec::SeqCodec::packed2bit);
            store::Store::write_tag_row(rows_only, t, codec::SeqCodec::blockdict);
            seqs.push_back(t.seq);
        }
        tags.plain = plain.bytes;
        tags.packed = packed.bytes;
        tags.blockdict = rows_only.bytes + (seqs.empty() ? 0 : codec::encode_blockdict(seqs).size());
        rep.catalogs.push_back(std::move(tags));
    }

    {
        StorageReport::CatalogLine refs;
        refs.name = "references";
        refs.rows = s.references().size();
        std::uint64_t raw = 0;
        CountingSink plain, packed, rows_only;
        std::vector<Sequence> seqs;
        for (const auto& r : s.references()) {
            raw += detail::fasta_bytes(r.name.size(), r.seq.length());
            store::Store::write_reference_row(plain, r, codec::SeqCodec::text);
            store::Store::write_reference_row(packed, r, codec::SeqCodec::packed2bit);
            store::Store::write_reference_row(rows_only, r, codec::SeqCodec::blockdict);
            seqs.push_back(r.seq);
        }
        if (!s.references().empty()) refs.raw = raw;
        refs.plain = plain.bytes;
        refs.packed = packed.bytes;
        refs.blockdict =
            rows_only.bytes + (seqs.empty() ? 0 : codec::encode_blockdict(seqs).size());
        rep.catalogs.push_back(std::move(refs));
    }

    {
        StorageReport::CatalogLine aligns;
        aligns.name = "alignments";
        aligns.rows = s.alignments().size();
        if (!s.alignments().empty()) aligns.raw = detail::alignments_tsv_bytes(s);
        CountingSink sink;
        for (const auto& a : s.alignments()) store::Store::write_alignment_row(sink, a);
        aligns.plain = aligns.blockdict = aligns.packed = sink.bytes;
        rep.catalogs.push_back(std::move(aligns));
    }

    {
        StorageReport::CatalogLine expr;
        expr.name = "gene_expressions";
        expr.rows = s.expressions().size();
        if (!s.expressions().empty()) expr.raw = detail::expressions_tsv_bytes(s);
        CountingSink sink;
        for (const auto& e : s.expressions()) store::Store::write_expression_row(sink, e);
        expr.plain = expr.blockdict = expr.packed = sink.bytes;
        rep.catalogs.push_back(std::move(expr));
    }

    for (const auto& b : s.blobs()) {
        rep.blob_payload_bytes += b.byte_length;
        std::error_code ec;
        const auto size = std::filesystem::file_size(b.path, ec);
        rep.registered_file_bytes += ec ? 0 : size;
    }

    return rep;
}

}  // namespace seqdb::report
