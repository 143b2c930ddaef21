#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "seqdb/core.hpp"
#include "seqdb/queries.hpp"

namespace seqdb::synth {

// Reproducible corpus generation. Everything is driven by one
// std::mt19937_64 seed, so a corpus can be regenerated bit-identically.

inline std::string random_bases(std::mt19937_64& rng, std::size_t len) {
    static constexpr char bases[4] = {'A', 'C', 'G', 'T'};
    std::string s(len, 'A');
    for (auto& c : s) c = bases[rng() & 3];
    return s;
}

inline Sequence random_sequence(std::mt19937_64& rng, std::size_t len, double n_prob = 0.0) {
    std::string s = random_bases(rng, len);
    if (n_prob > 0.0) {
        std::bernoulli_distribution coin(n_prob);
        for (auto& c : s)
            if (coin(rng)) c = 'N';
    }
    return Sequence(std::move(s));
}

inline QualityVector random_quality(std::mt19937_64& rng, std::size_t len, int lo = 25,
                                    int hi = 40) {
    std::uniform_int_distribution<int> dist(lo, hi);
    std::vector<std::uint8_t> scores(len);
    for (auto& s : scores) s = static_cast<std::uint8_t>(dist(rng));
    return QualityVector(std::move(scores));
}

/// Deterministic unique read coordinates in the style of period sequencer
/// output: fixed instrument and flowcell, tile cycling 1..300, 4-digit
/// x/y spots. Distinct indexes map to distinct coordinates.
struct ReadNameScheme {
    std::string instrument = "HWI-EAS255";
    std::string flowcell = "FC30M30AAXX";
    std::uint32_t lane = 1;

    ReadCoordinates coords_for(std::uint64_t index) const {
        ReadCoordinates c;
        c.instrument = instrument;
        c.flowcell = flowcell;
        c.lane = lane;
        c.tile = static_cast<std::uint32_t>(1 + index % 300);
        const std::uint64_t j = index / 300;
        c.x = static_cast<std::uint32_t>(1000 + j % 9000);
        c.y = static_cast<std::uint32_t>(1000 + (j / 9000) % 9000);
        return c;
    }
};

// ---------------------------------------------------------------------------
// Corpus profiles, cardinalities scalable from 1% to 100%
// ---------------------------------------------------------------------------

/// Digital gene expression corpus: one lane of short tag reads, a gene set
/// as references, and tag-to-gene alignments.
struct DgeProfile {
    std::uint64_t reads = 5028052;
    std::uint64_t unique_tags = 565526;
    std::uint64_t alignments = 563985;
    std::uint64_t genes = 24951;
    std::size_t read_length = 25;
    std::uint64_t gene_length = 500;
    double n_read_fraction = 0.02;  // reads spoiled with an N, dropped by binning

    static DgeProfile at_scale(double f) {
        DgeProfile p;
        p.reads = scaled(p.reads, f);
        p.unique_tags = scaled(p.unique_tags, f);
        p.alignments = scaled(p.alignments, f);
        p.genes = scaled(p.genes, f);
        return p;
    }

    static std::uint64_t scaled(std::uint64_t v, double f) {
        const auto s = static_cast<std::uint64_t>(std::llround(double(v) * f));
        return s < 1 ? 1 : s;
    }
};

/// Re-sequencing corpus: mostly-unique reads over 25 chromosome stand-ins
/// and read-to-reference alignments. Reference lengths are scaled-down
/// stand-ins; the row cardinalities mirror the profile.
struct GenomesProfile {
    std::uint64_t reads = 6271727;
    std::uint64_t alignments = 11418757;
    std::uint32_t references = 25;
    std::uint64_t reference_length = 1000000;
    std::size_t read_length = 36;

    static GenomesProfile at_scale(double f) {
        GenomesProfile p;
        p.reads = DgeProfile::scaled(p.reads, f);
        p.alignments = DgeProfile::scaled(p.alignments, f);
        p.reference_length = DgeProfile::scaled(p.reference_length, f);
        return p;
    }
};

struct CorpusFiles {
    std::filesystem::path reads_fastq;
    std::filesystem::path refs_fasta;
    std::filesystem::path alignments_tsv;
    std::uint64_t read_count = 0;
    std::uint64_t tag_count = 0;       // distinct N-free sequences (DGE only)
    std::uint64_t alignment_count = 0;
    std::uint64_t reference_count = 0;
};

namespace detail {

inline void write_fastq_line(std::ofstream& out, const std::string& name, const std::string& seq,
                             const std::string& qual) {
    out.put('@');
    out << name << '\n' << seq << "\n+" << name << '\n' << qual << '\n';
}

}  // namespace detail

/// Generates a DGE corpus into `dir`: reads.fastq (one lane), refs.fasta
/// (the gene set) and alignments.tsv whose subject ids anticipate the tag
/// ids that binning assigns (rank order). The '+' line repeats the read
/// name, as sequencer output of the period did.
inline CorpusFiles generate_dge_corpus(const std::filesystem::path& dir, std::uint64_t seed,
                                       double scale) {
    const DgeProfile p = DgeProfile::at_scale(scale);
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(seed);
    CorpusFiles files;
    files.reads_fastq = dir / "reads.fastq";
    files.refs_fasta = dir / "refs.fasta";
    files.alignments_tsv = dir / "alignments.tsv";

    // distinct tag pool
    std::vector<std::string> pool;
    pool.reserve(p.unique_tags);
    std::unordered_set<std::string> seen;
    while (pool.size() < p.unique_tags) {
        std::string s = random_bases(rng, p.read_length);
        if (seen.insert(s).second) pool.push_back(std::move(s));
    }

    ReadNameScheme scheme;
    std::vector<std::uint64_t> freq(pool.size(), 0);
    std::bernoulli_distribution spoil(p.n_read_fraction);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    {
        std::ofstream out(files.reads_fastq, std::ios::binary);
        if (!out.is_open()) throw IoError("cannot create " + files.reads_fastq.string());
        for (std::uint64_t i = 0; i < p.reads; ++i) {
            // every tag appears at least once, the rest is skewed sampling
            std::size_t t;
            if (i < pool.size()) {
                t = static_cast<std::size_t>(i);
            } else {
                const double u = uni(rng);
                t = static_cast<std::size_t>(double(pool.size()) * u * u);
                if (t >= pool.size()) t = pool.size() - 1;
            }
            std::string seq = pool[t];
            bool spoiled = false;
            if (i >= pool.size() && spoil(rng)) {
                seq[rng() % seq.size()] = 'N';
                spoiled = true;
            }
            if (!spoiled) ++freq[t];
            const auto name = scheme.coords_for(i).to_name();
            detail::write_fastq_line(out, name, seq,
                                     random_quality(rng, seq.size()).to_phred33());
        }
        if (!out) throw IoError("write failure on " + files.reads_fastq.string());
    }
    files.read_count = p.reads;
    files.tag_count = pool.size();

    {
        std::ofstream out(files.refs_fasta, std::ios::binary);
        if (!out.is_open()) throw IoError("cannot create " + files.refs_fasta.string());
        for (std::uint64_t g = 0; g < p.genes; ++g) {
            char name[32];
            std::snprintf(name, sizeof name, "gene%06llu", static_cast<unsigned long long>(g + 1));
            out.put('>');
            out << name << '\n';
            const std::string seq = random_bases(rng, p.gene_length);
            for (std::size_t i = 0; i < seq.size(); i += 60)
                out << std::string_view(seq).substr(i, 60) << '\n';
        }
        if (!out) throw IoError("write failure on " + files.refs_fasta.string());
    }
    files.reference_count = p.genes;

    // tag ids anticipate binning: rank under (frequency desc, seq asc)
    {
        std::vector<std::pair<std::string, std::uint64_t>> counts;
        counts.reserve(pool.size());
        for (std::size_t t = 0; t < pool.size(); ++t)
            if (freq[t] > 0) counts.emplace_back(pool[t], freq[t]);
        const auto ranked = queries::rank_rows(std::move(counts));
        const std::uint64_t rankable = ranked.size();

        std::ofstream out(files.alignments_tsv, std::ios::binary);
        if (!out.is_open()) throw IoError("cannot create " + files.alignments_tsv.string());
        std::uniform_int_distribution<std::uint64_t> gene_dist(1, p.genes);
        std::uniform_int_distribution<std::uint64_t> pos_dist(
            1, p.gene_length > p.read_length ? p.gene_length - p.read_length + 1 : 1);
        for (std::uint64_t a = 0; a < p.alignments; ++a) {
            const std::uint64_t tag_id = 1 + a % rankable;
            const std::uint64_t gene = gene_dist(rng);
            char line[64];
            std::snprintf(line, sizeof line, "%llu\tgene%06llu\t%llu\t%c\n",
                          static_cast<unsigned long long>(tag_id),
                          static_cast<unsigned long long>(gene),
                          static_cast<unsigned long long>(pos_dist(rng)),
                          (rng() & 1) ? '+' : '-');
            out << line;
        }
        if (!out) throw IoError("write failure on " + files.alignments_tsv.string());
        files.alignment_count = p.alignments;
    }

    return files;
}

/// Generates a re-sequencing corpus into `dir`: mostly-unique reads,
/// chromosome stand-ins chr1..chr25, and read-to-reference alignments.
inline CorpusFiles generate_genomes_corpus(const std::filesystem::path& dir, std::uint64_t seed,
                                           double scale) {
    const GenomesProfile p = GenomesProfile::at_scale(scale);
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(seed);
    CorpusFiles files;
    files.reads_fastq = dir / "reads.fastq";
    files.refs_fasta = dir / "refs.fasta";
    files.alignments_tsv = dir / "alignments.tsv";

    ReadNameScheme scheme;
    {
        std::ofstream out(files.reads_fastq, std::ios::binary);
        if (!out.is_open()) throw IoError("cannot create " + files.reads_fastq.string());
        for (std::uint64_t i = 0; i < p.reads; ++i) {
            const std::string seq = random_bases(rng, p.read_length);
            const auto name = scheme.coords_for(i).to_name();
            detail::write_fastq_line(out, name, seq,
                                     random_quality(rng, seq.size()).to_phred33());
        }
        if (!out) throw IoError("write failure on " + files.reads_fastq.string());
    }
    files.read_count = p.reads;

    {
        std::ofstream out(files.refs_fasta, std::ios::binary);
        if (!out.is_open()) throw IoError("cannot create " + files.refs_fasta.string());
        for (std::uint32_t r = 1; r <= p.references; ++r) {
            out << ">chr" << r << '\n';
            // stream the chromosome in 60-column lines without holding it
            std::uint64_t remaining = p.reference_length;
            while (remaining > 0) {
                const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(60, remaining));
                out << random_bases(rng, n) << '\n';
                remaining -= n;
            }
        }
        if (!out) throw IoError("write failure on " + files.refs_fasta.string());
    }
    files.reference_count = p.references;

    {
        std::ofstream out(files.alignments_tsv, std::ios::binary);
        if (!out.is_open()) throw IoError("cannot create " + files.alignments_tsv.string());
        std::uniform_int_distribution<std::uint32_t> ref_dist(1, p.references);
        std::uniform_int_distribution<std::uint64_t> pos_dist(
            1, p.reference_length > p.read_length ? p.reference_length - p.read_length + 1 : 1);
        for (std::uint64_t a = 0; a < p.alignments; ++a) {
            const std::uint64_t read_id = 1 + a % p.reads;
            char line[64];
            std::snprintf(line, sizeof line, "%llu\tchr%u\t%llu\t%c\n",
                          static_cast<unsigned long long>(read_id), ref_dist(rng),
                          static_cast<unsigned long long>(pos_dist(rng)),
                          (rng() & 1) ? '+' : '-');
            out << line;
        }
        if (!out) throw IoError("write failure on " + files.alignments_tsv.string());
        files.alignment_count = p.alignments;
    }

    return files;
}

/// Writes a FASTA file of `records` single-line short reads, the shape of
/// the scan benchmark input.
inline void generate_count_fasta(const std::filesystem::path& path, std::uint64_t records,
                                 std::size_t read_length, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::ofstream out(path, std::ios::binary);
    if (!out.is_open()) throw IoError("cannot create " + path.string());
    for (std::uint64_t i = 0; i < records; ++i) {
        out << ">r" << i << '\n' << random_bases(rng, read_length) << '\n';
    }
    if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace seqdb::synth
