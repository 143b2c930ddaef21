#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqdb/consensus.hpp"
#include "seqdb/core.hpp"
#include "seqdb/fastx.hpp"
#include "seqdb/parexec.hpp"
#include "seqdb/queries.hpp"
#include "seqdb/report.hpp"
#include "seqdb/store.hpp"
#include "seqdb/synth.hpp"

namespace seqdb::cli {

// Exit codes: 0 success, 1 usage, 2 data error, 3 I/O error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitIo = 3;

namespace detail {

struct Options {
    std::string store_path;
    std::size_t buffer_size = fastx::kDefaultBufferSize;
    std::size_t workers = parexec::default_worker_count();
    std::uint64_t seed = 1;
    std::string output;
};

struct SampleFlags {
    SurrogateId experiment = 0, group = 0, sample = 0;
    SampleKey key() const { return {experiment, group, sample}; }
};

inline void add_sample_flags(CLI::App* cmd, SampleFlags& f) {
    cmd->add_option("-e,--experiment", f.experiment, "experiment id")->required();
    cmd->add_option("-g,--sample-group", f.group, "sample group id")->required();
    cmd->add_option("-s,--sample", f.sample, "sample id")->required();
}

class Output {
public:
    Output(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary);
            if (!file_.is_open()) throw IoError("cannot open output file: " + path);
            os_ = &file_;
        }
    }
    std::ostream& stream() { return *os_; }

private:
    std::ofstream file_;
    std::ostream* os_;
};

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double millis() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline store::Store open_store(const Options& opt) {
    if (opt.store_path.empty())
        throw CLI::ValidationError("--store", "this command needs a store directory");
    return store::Store::open(opt.store_path);
}

inline std::vector<ShortRead> sample_reads(const store::Store& s, const SampleKey& key) {
    std::vector<ShortRead> reads;
    for (const auto& r : s.reads())
        if (r.sample == key) reads.push_back(r);
    return reads;
}

// Builds the sorted AlignedRead set for one sample, resolving alignment
// subjects as reads.
inline std::vector<consensus::AlignedRead> sample_aligned_reads(const store::Store& s,
                                                                const SampleKey& key) {
    std::vector<consensus::AlignedRead> out;
    for (const auto& a : s.alignments()) {
        if (a.sample != key) continue;
        if (a.subject_id < 1 || a.subject_id > s.reads().size())
            throw DataError("alignment " + std::to_string(a.alignment_id) + " subject " +
                            std::to_string(a.subject_id) + " does not resolve to a read");
        const auto& read = s.reads()[a.subject_id - 1];
        out.push_back({a, read.seq, read.qual});
    }
    std::sort(out.begin(), out.end(),
              [](const consensus::AlignedRead& x, const consensus::AlignedRead& y) {
                  if (x.alignment.gene_id != y.alignment.gene_id)
                      return x.alignment.gene_id < y.alignment.gene_id;
                  if (x.alignment.pos != y.alignment.pos) return x.alignment.pos < y.alignment.pos;
                  return x.alignment.alignment_id < y.alignment.alignment_id;
              });
    return out;
}

inline std::uint64_t count_records(const std::string& target, const store::Store* s,
                                   std::size_t buffer_size) {
    if (auto guid = store::Guid::parse(target)) {
        if (!s) throw CLI::ValidationError("--store", "counting a blob needs the store");
        const auto& blob = s->blob_or_throw(*guid);
        if (blob.format == store::BlobFormat::fastq) {
            auto reader = s->list_blob_fastq(*guid, buffer_size);
            std::uint64_t n = 0;
            while (reader.next()) ++n;
            return n;
        }
        if (blob.format == store::BlobFormat::fasta) {
            auto reader = s->list_blob_fasta(*guid, buffer_size);
            std::uint64_t n = 0;
            while (reader.next()) ++n;
            return n;
        }
        throw DataError("blob " + target + " has format 'other'; cannot list records");
    }
    const std::filesystem::path path(target);
    const auto ext = path.extension().string();
    if (ext == ".fastq" || ext == ".fq") {
        auto reader = fastx::open_fastq(path, buffer_size);
        std::uint64_t n = 0;
        while (reader.next()) ++n;
        return n;
    }
    if (ext == ".fasta" || ext == ".fa" || ext == ".fna") {
        auto reader = fastx::open_fasta(path, buffer_size);
        std::uint64_t n = 0;
        while (reader.next()) ++n;
        return n;
    }
    throw DataError("cannot infer format of '" + target +
                    "' (expected .fastq/.fq or .fasta/.fa/.fna, or a registered blob guid)");
}

inline std::uint64_t import_references(store::Store& s, const std::filesystem::path& fasta,
                                       std::size_t buffer_size) {
    auto reader = fastx::open_fasta(fasta, buffer_size);
    std::uint64_t added = 0;
    while (auto rec = reader.next()) {
        if (const auto* existing = s.find_reference_by_name(rec->name)) {
            if (existing->seq.length() != rec->seq.length())
                throw DataError("reference '" + rec->name + "' already present with length " +
                                std::to_string(existing->seq.length()) + ", file has " +
                                std::to_string(rec->seq.length()));
            continue;
        }
        s.add_reference(std::move(rec->name), std::move(rec->seq));
        ++added;
    }
    return added;
}

inline void materialize_tags(store::Store& s, const SampleKey& key, std::size_t workers) {
    for (const auto& t : s.tags())
        if (t.sample == key)
            throw DataError("tags already materialized for this sample");
    const auto reads = sample_reads(s, key);
    const auto rows = queries::bin_unique_reads(reads, key, workers);
    for (const auto& row : rows) s.add_tag(key, row.seq, row.frequency, row.rank);
}

}  // namespace detail

/// Runs the CLI with the given arguments (program name excluded). Data
/// output goes to `out` (or the --output file); diagnostics and timing go
/// to `err`. Returns the process exit code.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    using namespace detail;
    Options opt;

    CLI::App app{"short-read sequencing store and analysis toolkit"};
    app.require_subcommand(1);
    app.add_option("--store", opt.store_path, "store directory");
    app.add_option("--buffer-size", opt.buffer_size, "parser chunk buffer in bytes")
        ->check(CLI::Range(std::size_t(1024), std::size_t(1) << 30));
    app.add_option("--workers", opt.workers, "worker threads")
        ->check(CLI::Range(std::size_t(1), std::size_t(256)));
    app.add_option("--seed", opt.seed, "seed for synthetic data");
    app.add_option("-o,--output", opt.output, "write result to file instead of stdout");

    // import
    std::string import_file, import_mode = "normalized";
    std::uint32_t import_lane = 1;
    SampleFlags import_sample;
    auto* cmd_import = app.add_subcommand("import", "import or register a FASTQ file");
    cmd_import->add_option("file", import_file, "FASTQ path")->required();
    add_sample_flags(cmd_import, import_sample);
    cmd_import->add_option("--lane", import_lane, "flowcell lane")->check(CLI::Range(1, 8));
    cmd_import->add_option("--mode", import_mode, "normalized | 1to1 | register")
        ->check(CLI::IsMember({"normalized", "1to1", "register"}));

    // import-refs
    std::string refs_file;
    auto* cmd_refs = app.add_subcommand("import-refs", "import reference sequences from FASTA");
    cmd_refs->add_option("file", refs_file, "FASTA path")->required();

    // count
    std::string count_target;
    auto* cmd_count = app.add_subcommand("count", "stream-count records in a file or blob");
    cmd_count->add_option("target", count_target, "path or registered blob guid")->required();

    // bin
    SampleFlags bin_sample;
    bool bin_materialize = false;
    auto* cmd_bin = app.add_subcommand("bin", "rank unique N-free read sequences by frequency");
    add_sample_flags(cmd_bin, bin_sample);
    cmd_bin->add_flag("--materialize", bin_materialize, "store the result as the Tag catalog");

    // expr
    SampleFlags expr_sample;
    auto* cmd_expr = app.add_subcommand("expr", "digital gene expression per gene");
    add_sample_flags(cmd_expr, expr_sample);

    // consensus
    SampleFlags cons_sample;
    std::string cons_refs;
    std::size_t cons_k = 0;
    auto* cmd_cons = app.add_subcommand("consensus", "call per-reference consensus sequences");
    add_sample_flags(cmd_cons, cons_sample);
    cmd_cons->add_option("--refs", cons_refs, "reference FASTA imported before calling");
    cmd_cons->add_option("--k", cons_k, "coordinate-space partitions (default: workers)");

    // load-alignments
    std::string aln_file;
    SampleFlags aln_sample;
    auto* cmd_aln = app.add_subcommand("load-alignments",
                                       "load subject/ref/pos/strand TSV alignments");
    cmd_aln->add_option("file", aln_file, "TSV path")->required();
    add_sample_flags(cmd_aln, aln_sample);

    // storage-report
    std::string corpus_dir;
    auto* cmd_report = app.add_subcommand("storage-report",
                                          "import a corpus under every representation and "
                                          "report exact byte totals");
    cmd_report->add_option("corpus", corpus_dir, "corpus directory")->required();

    // gen-synthetic
    std::string gen_dir, gen_profile = "dge";
    double gen_scale = 0.01;
    auto* cmd_gen = app.add_subcommand("gen-synthetic", "generate a reproducible corpus");
    cmd_gen->add_option("--out", gen_dir, "output directory")->required();
    cmd_gen->add_option("--profile", gen_profile, "dge | genomes")
        ->check(CLI::IsMember({"dge", "genomes"}));
    cmd_gen->add_option("--scale", gen_scale, "cardinality scale, 0.0001 to 1.0")
        ->check(CLI::Range(0.0001, 1.0));

    std::vector<const char*> argv;
    argv.push_back("seqdb");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        std::ostringstream usage;
        const int rc = app.exit(e, usage, usage);
        (rc == 0 ? out : err) << usage.str();
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (cmd_import->parsed()) {
            auto s = open_store(opt);
            const SampleKey key = import_sample.key();
            if (import_mode == "register") {
                const auto guid = s.register_blob(import_file, key, import_lane, "FastQ");
                s.save();
                out << "registered " << guid.to_string() << " ("
                    << s.blob_or_throw(guid).byte_length << " bytes)\n";
            } else {
                auto source = std::make_unique<fastx::FileSource>(import_file);
                const std::uint64_t n =
                    import_mode == "normalized"
                        ? s.import_fastq_normalized(std::move(source), key, import_lane,
                                                    opt.buffer_size)
                        : s.import_fastq_1to1(std::move(source), key, import_lane,
                                              opt.buffer_size);
                s.save();
                out << n << (import_mode == "normalized" ? " reads imported\n"
                                                         : " rows imported (1to1)\n");
            }
        } else if (cmd_refs->parsed()) {
            auto s = open_store(opt);
            const auto n = import_references(s, refs_file, opt.buffer_size);
            s.save();
            out << n << " references imported\n";
        } else if (cmd_count->parsed()) {
            std::optional<store::Store> s;
            if (!opt.store_path.empty()) s = store::Store::open(opt.store_path);
            Stopwatch watch;
            const auto n = count_records(count_target, s ? &*s : nullptr, opt.buffer_size);
            const double ms = watch.millis();
            Output output(opt.output, out);
            output.stream() << "records\t" << n << "\n";
            err << "phase\tk\tmillis\ncount\t1\t" << ms << "\n";
            if (ms > 0)
                err << "records_per_s\t" << static_cast<std::uint64_t>(double(n) * 1000.0 / ms)
                    << "\n";
        } else if (cmd_bin->parsed()) {
            auto s = open_store(opt);
            const SampleKey key = bin_sample.key();
            Stopwatch watch;
            const auto reads = sample_reads(s, key);
            const auto rows = queries::bin_unique_reads(reads, key, opt.workers);
            const double ms = watch.millis();
            if (bin_materialize) {
                for (const auto& t : s.tags())
                    if (t.sample == key) throw DataError("tags already materialized for this sample");
                for (const auto& row : rows) s.add_tag(key, row.seq, row.frequency, row.rank);
                s.save();
            }
            Output output(opt.output, out);
            output.stream() << queries::binned_rows_to_tsv(rows);
            err << "phase\tk\tmillis\nbin\t" << opt.workers << "\t" << ms << "\n";
        } else if (cmd_expr->parsed()) {
            auto s = open_store(opt);
            const SampleKey key = expr_sample.key();
            Stopwatch watch;
            const auto rows = queries::gene_expression(s.alignments(), s.tags(), key, opt.workers);
            const double ms = watch.millis();
            Output output(opt.output, out);
            output.stream() << queries::expression_rows_to_tsv(rows);
            err << "phase\tk\tmillis\nexpr\t" << opt.workers << "\t" << ms << "\n";
        } else if (cmd_cons->parsed()) {
            auto s = open_store(opt);
            const SampleKey key = cons_sample.key();
            if (!cons_refs.empty()) {
                detail::import_references(s, cons_refs, opt.buffer_size);
                s.save();
            }
            if (s.references().empty())
                throw DataError("no references in store; import-refs or pass --refs");
            const std::size_t k = cons_k == 0 ? opt.workers : cons_k;
            Stopwatch watch;
            const auto aligned = sample_aligned_reads(s, key);
            const auto result =
                consensus::consensus_partitioned(aligned, s.references(), k, opt.workers);
            const double ms = watch.millis();
            Output output(opt.output, out);
            std::vector<fastx::FastaRecord> records;
            records.reserve(result.size());
            for (const auto& c : result) {
                const auto& ref = s.references()[c.ref_id - 1];
                records.push_back({ref.name + "_consensus", c.seq});
            }
            fastx::write_fasta(records, output.stream());
            err << "phase\tk\tmillis\nconsensus\t" << k << "\t" << ms << "\n";
        } else if (cmd_aln->parsed()) {
            auto s = open_store(opt);
            std::ifstream in(aln_file);
            if (!in.is_open()) throw IoError("cannot open file: " + aln_file);
            const auto n = s.load_alignments_tsv(in, aln_sample.key());
            s.save();
            out << n << " alignments loaded\n";
        } else if (cmd_report->parsed()) {
            const std::filesystem::path dir(corpus_dir);
            if (!std::filesystem::is_directory(dir))
                throw IoError("corpus directory not found: " + corpus_dir);
            store::Store s;  // ephemeral; the report is an analysis
            const SampleKey key{1, 1, 1};
            std::vector<std::filesystem::path> fastqs;
            for (const auto& entry : std::filesystem::directory_iterator(dir))
                if (entry.path().extension() == ".fastq" || entry.path().extension() == ".fq")
                    fastqs.push_back(entry.path());
            std::sort(fastqs.begin(), fastqs.end());
            if (fastqs.empty()) throw DataError("no .fastq files in corpus: " + corpus_dir);
            for (const auto& f : fastqs) {
                // the file's lane comes from its first record
                std::uint32_t lane = 1;
                {
                    auto probe = fastx::open_fastq(f, opt.buffer_size);
                    if (auto rec = probe.next()) {
                        if (auto coords = ReadCoordinates::from_name(rec->name))
                            lane = coords->lane;
                    }
                }
                s.register_blob(f, key, lane, "FastQ");
                s.import_fastq_normalized(std::make_unique<fastx::FileSource>(f), key, lane,
                                          opt.buffer_size);
                s.import_fastq_1to1(std::make_unique<fastx::FileSource>(f), key, lane,
                                    opt.buffer_size);
            }
            if (std::filesystem::exists(dir / "refs.fasta"))
                import_references(s, dir / "refs.fasta", opt.buffer_size);
            if (std::filesystem::exists(dir / "alignments.tsv")) {
                materialize_tags(s, key, opt.workers);
                std::ifstream in(dir / "alignments.tsv");
                if (!in.is_open()) throw IoError("cannot open alignments.tsv");
                s.load_alignments_tsv(in, key);
                for (const auto& row : queries::gene_expression(s.alignments(), s.tags(), key,
                                                                opt.workers))
                    s.add_expression(row);
            }
            Output output(opt.output, out);
            output.stream() << report::compute_storage_report(s).to_table();
        } else if (cmd_gen->parsed()) {
            const auto files = gen_profile == "dge"
                                   ? synth::generate_dge_corpus(gen_dir, opt.seed, gen_scale)
                                   : synth::generate_genomes_corpus(gen_dir, opt.seed, gen_scale);
            out << "profile\t" << gen_profile << "\nscale\t" << gen_scale << "\nseed\t" << opt.seed
                << "\nreads\t" << files.read_count << "\nreferences\t" << files.reference_count
                << "\nalignments\t" << files.alignment_count << "\nreads_fastq\t"
                << files.reads_fastq.string() << "\nrefs_fasta\t" << files.refs_fasta.string()
                << "\nalignments_tsv\t" << files.alignments_tsv.string() << "\n";
        }
        return kExitOk;
    } catch (const CLI::Error& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        err << "data error: " << e.what() << " (byte offset " << e.byte_offset() << ", record "
            << e.record_ordinal() << ")\n";
        return kExitData;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace seqdb::cli
