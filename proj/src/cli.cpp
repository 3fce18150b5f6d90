#include "tsctm/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tsctm/corpus.hpp"
#include "tsctm/eval.hpp"
#include "tsctm/model.hpp"
#include "tsctm/selftest.hpp"
#include "tsctm/trainer.hpp"

namespace tsctm::cli {

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

std::string num(double x) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

std::string quote(const std::string& s) {
    if (!s.empty() && s.find_first_of(" \t\"'\\$`") == std::string::npos) return s;
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

struct PreprocessArgs {
    std::string input, aug, labels, out;
    std::size_t min_freq = 5;
    std::size_t min_len = 2;
};

struct TrainArgs {
    std::string corpus, out, log;
    std::size_t K = 50, hidden = 200, encoder_layers = 2, epochs = 200, batch_size = 200;
    double lr = 0.002, lambda_commit = 0.1, lambda_tsc = 1.0, lambda_original = 1.0, tau = 0.5;
    std::string denominator = "infonce", reduce = "mean", vq_norm = "sq";
    bool no_negatives = false, augmented = false, no_batch_norm = false, quiet = false;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 0, threads = 1;
};

struct EvalArgs {
    std::string model, corpus, ref_corpus, out;
    std::size_t top_words = 15, window = 0, threads = 1;
};

struct ExportArgs {
    std::string model, corpus, topics, theta;
    std::size_t top_words = 15, threads = 1;
};

struct SelftestArgs {
    std::size_t instances = 20;
};

std::string echo(const PreprocessArgs& a) {
    std::ostringstream s;
    s << "tsctm preprocess --input " << quote(a.input);
    if (!a.aug.empty()) s << " --aug " << quote(a.aug);
    if (!a.labels.empty()) s << " --labels " << quote(a.labels);
    s << " --min-freq " << a.min_freq << " --min-len " << a.min_len << " --out " << quote(a.out);
    return s.str();
}

std::string echo(const TrainArgs& a) {
    std::ostringstream s;
    s << "tsctm train --corpus " << quote(a.corpus) << " -K " << a.K << " --hidden " << a.hidden
      << " --encoder-layers " << a.encoder_layers << " --epochs " << a.epochs << " --lr "
      << num(a.lr) << " --batch-size " << a.batch_size << " --lambda-commit "
      << num(a.lambda_commit) << " --lambda-tsc " << num(a.lambda_tsc) << " --lambda-original "
      << num(a.lambda_original) << " --tau " << num(a.tau) << " --denominator " << a.denominator
      << " --reduce " << a.reduce << " --vq-norm " << a.vq_norm;
    if (a.no_negatives) s << " --no-negatives";
    if (a.no_batch_norm) s << " --no-batch-norm";
    if (a.augmented) s << " --augmented";
    s << " --seed " << a.seed << " --checkpoint-every " << a.checkpoint_every << " --threads "
      << a.threads << " --out " << quote(a.out) << " --log " << quote(a.log);
    return s.str();
}

std::string echo(const EvalArgs& a) {
    std::ostringstream s;
    s << "tsctm eval --model " << quote(a.model) << " --corpus " << quote(a.corpus)
      << " --ref-corpus " << quote(a.ref_corpus) << " --top-words " << a.top_words
      << " --window " << a.window << " --threads " << a.threads;
    if (!a.out.empty()) s << " --out " << quote(a.out);
    return s.str();
}

std::string echo(const ExportArgs& a) {
    std::ostringstream s;
    s << "tsctm export --model " << quote(a.model) << " --corpus " << quote(a.corpus)
      << " --top-words " << a.top_words << " --threads " << a.threads;
    if (!a.topics.empty()) s << " --topics " << quote(a.topics);
    if (!a.theta.empty()) s << " --theta " << quote(a.theta);
    return s.str();
}

int do_preprocess(const PreprocessArgs& a) {
    Corpus corpus = preprocess(read_lines(a.input), {a.min_freq, a.min_len});
    if (!a.aug.empty()) corpus = attach_augmentation(std::move(corpus), read_lines(a.aug));
    if (!a.labels.empty()) corpus = attach_labels(std::move(corpus), read_labels(a.labels));
    save_corpus(corpus, a.out);
    std::cerr << "documents=" << corpus.size() << " vocab=" << corpus.vocab.size()
              << " augmented=" << (corpus.has_augmentation() ? "yes" : "no")
              << " labels=" << (corpus.labels ? "yes" : "no") << '\n';
    return kExitOk;
}

int do_train(const TrainArgs& a) {
    const Corpus corpus = load_corpus(a.corpus);
    if (a.augmented && !corpus.has_augmentation()) {
        throw std::runtime_error("--augmented requires a corpus with paired augmentations; " +
                                 a.corpus + " has no aug_docs (preprocess with --aug)");
    }
    TrainConfig cfg;
    cfg.num_topics = a.K;
    cfg.hidden = a.hidden;
    cfg.encoder_layers = a.encoder_layers;
    cfg.batch_norm = !a.no_batch_norm;
    cfg.epochs = a.epochs;
    cfg.lr = a.lr;
    cfg.batch_size = a.batch_size;
    cfg.loss.lambda_commit = a.lambda_commit;
    cfg.loss.vq_norm = a.vq_norm == "l2" ? VqNorm::l2 : VqNorm::squared;
    cfg.loss.tsc.tau = a.tau;
    cfg.loss.tsc.lambda_tsc = a.lambda_tsc;
    cfg.loss.tsc.lambda_original = a.lambda_original;
    cfg.loss.tsc.include_positive_in_denominator = a.denominator == "infonce";
    cfg.loss.tsc.reduce = a.reduce == "mean" ? Reduction::mean : Reduction::sum;
    cfg.loss.tsc.use_negatives = !a.no_negatives;
    cfg.seed = a.seed;
    cfg.augmented = a.augmented;
    cfg.checkpoint_every = a.checkpoint_every;
    cfg.checkpoint_path = a.out;
    cfg.threads = a.threads;

    std::ofstream log(a.log, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + a.log);
    train(corpus, cfg, [&](const EpochRecord& rec) {
        const std::string line = to_json_line(rec);
        log << line << '\n' << std::flush;
        if (!a.quiet) std::cout << line << '\n' << std::flush;
    });
    return kExitOk;
}

int do_eval(const EvalArgs& a) {
    const ModelParams params = load_checkpoint(a.model);
    const Corpus corpus = load_corpus(a.corpus);
    const Corpus ref = a.ref_corpus == a.corpus ? corpus : load_corpus(a.ref_corpus);
    const EvalReport r = evaluate_model(params, corpus, ref, a.top_words, a.window, a.threads);
    if (!a.out.empty()) write_file(a.out, report_json(r));
    std::cout << report_key_values(r);
    return kExitOk;
}

int do_export(const ExportArgs& a) {
    const ModelParams params = load_checkpoint(a.model);
    const Corpus corpus = load_corpus(a.corpus);
    if (!a.topics.empty()) {
        write_file(a.topics, format_topics(top_words(params.beta, a.top_words), corpus.vocab));
    }
    if (!a.theta.empty()) write_file(a.theta, format_theta(infer_theta(params, corpus, a.threads)));
    return kExitOk;
}

int do_selftest(const SelftestArgs& a) {
    std::vector<CheckResult> results = run_gradient_suite(a.instances);
    results.push_back(run_quantization_oracle());
    for (auto& r : run_metric_oracles()) results.push_back(std::move(r));
    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        ok = ok && r.passed;
    }
    std::cout << (ok ? "selftest passed\n" : "selftest FAILED\n");
    return ok ? kExitOk : kExitRuntime;
}

std::uint64_t fallback_seed() {
    if (const char* env = std::getenv("TSCTM_SEED")) {
        std::uint64_t v = 0;
        const char* end = env + std::strlen(env);
        auto [p, ec] = std::from_chars(env, end, v);
        if (ec != std::errc() || p != end) {
            throw CLI::ValidationError("TSCTM_SEED", "must be an unsigned integer");
        }
        return v;
    }
    return kDefaultSeed;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Topic-semantic contrastive topic model for short texts"};
    app.name("tsctm");
    app.require_subcommand(1);

    PreprocessArgs pa;
    auto* pre = app.add_subcommand("preprocess", "Tokenize raw text into a processed corpus");
    pre->add_option("--input", pa.input, "Raw corpus, one document per line")->required();
    pre->add_option("--aug", pa.aug, "Augmented corpus, one line per raw line");
    pre->add_option("--labels", pa.labels, "Integer labels, per raw line or per kept document");
    pre->add_option("--min-freq", pa.min_freq, "Minimum document frequency")
        ->capture_default_str()->check(CLI::PositiveNumber);
    pre->add_option("--min-len", pa.min_len, "Minimum tokens per document")
        ->capture_default_str()->check(CLI::Range(std::size_t{2}, std::size_t{1} << 30));
    pre->add_option("--out", pa.out, "Processed corpus output")->required();

    TrainArgs ta;
    std::optional<std::uint64_t> seed;
    auto* tr = app.add_subcommand("train", "Train a model");
    tr->add_option("--corpus", ta.corpus, "Processed corpus")->required();
    tr->add_option("-K,--topics", ta.K, "Number of topics")->capture_default_str()
        ->check(CLI::PositiveNumber);
    tr->add_option("--hidden", ta.hidden, "Encoder hidden width")->capture_default_str()
        ->check(CLI::PositiveNumber);
    tr->add_option("--encoder-layers", ta.encoder_layers, "Softplus hidden layers (1 or 2)")
        ->capture_default_str()->check(CLI::Range(1, 2));
    tr->add_option("--epochs", ta.epochs, "Training epochs")->capture_default_str()
        ->check(CLI::PositiveNumber);
    tr->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str()
        ->check(CLI::PositiveNumber);
    tr->add_option("--batch-size", ta.batch_size, "Minibatch size")->capture_default_str()
        ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 30));
    tr->add_option("--lambda-commit", ta.lambda_commit, "Commitment weight")
        ->capture_default_str()->check(CLI::NonNegativeNumber);
    tr->add_option("--lambda-tsc", ta.lambda_tsc, "Contrastive objective weight")
        ->capture_default_str()->check(CLI::NonNegativeNumber);
    tr->add_option("--lambda-original", ta.lambda_original,
                   "Weight of original-data positives under augmentation")
        ->capture_default_str()->check(CLI::NonNegativeNumber);
    tr->add_option("--tau", ta.tau, "Score scale")->capture_default_str()
        ->check(CLI::PositiveNumber);
    tr->add_option("--denominator", ta.denominator,
                   "infonce: positive in the denominator; literal: negatives only")
        ->capture_default_str()->check(CLI::IsMember({"infonce", "literal"}));
    tr->add_option("--reduce", ta.reduce, "Reduction over an anchor's positives")
        ->capture_default_str()->check(CLI::IsMember({"sum", "mean"}));
    tr->add_option("--vq-norm", ta.vq_norm, "Quantization loss norm")->capture_default_str()
        ->check(CLI::IsMember({"sq", "l2"}));
    tr->add_flag("--no-negatives", ta.no_negatives, "Pull positives only (ablation)");
    tr->add_flag("--no-batch-norm", ta.no_batch_norm,
                 "Use the raw linear output as h (no batch normalization)");
    tr->add_flag("--augmented", ta.augmented, "Train with paired augmentations");
    tr->add_option("--seed", seed, "PRNG seed (default: $TSCTM_SEED, else 42)");
    tr->add_option("--checkpoint-every", ta.checkpoint_every,
                   "Also checkpoint every N epochs (0: final only)")->capture_default_str();
    tr->add_option("--threads", ta.threads, "Worker threads")->capture_default_str()
        ->check(CLI::PositiveNumber);
    tr->add_option("--out", ta.out, "Checkpoint output")->required();
    tr->add_option("--log", ta.log, "Epoch log, JSON lines (default: <out>.log.jsonl)");
    tr->add_flag("--quiet", ta.quiet, "Do not print epoch records to stdout");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "Evaluate a trained model");
    ev->add_option("--model", ea.model, "Checkpoint")->required();
    ev->add_option("--corpus", ea.corpus, "Processed corpus")->required();
    ev->add_option("--ref-corpus", ea.ref_corpus, "Reference corpus for NPMI (default: --corpus)");
    ev->add_option("--top-words", ea.top_words, "Words per topic")->capture_default_str()
        ->check(CLI::PositiveNumber);
    ev->add_option("--window", ea.window, "NPMI window in tokens (0: whole document)")
        ->capture_default_str();
    ev->add_option("--threads", ea.threads, "Worker threads")->capture_default_str()
        ->check(CLI::PositiveNumber);
    ev->add_option("--out", ea.out, "Write the JSON report here");

    ExportArgs xa;
    auto* ex = app.add_subcommand("export", "Export topics and topic distributions");
    ex->add_option("--model", xa.model, "Checkpoint")->required();
    ex->add_option("--corpus", xa.corpus, "Processed corpus")->required();
    ex->add_option("--topics", xa.topics, "Topic word list output");
    ex->add_option("--theta", xa.theta, "Topic distribution matrix output");
    ex->add_option("--top-words", xa.top_words, "Words per topic")->capture_default_str()
        ->check(CLI::PositiveNumber);
    ex->add_option("--threads", xa.threads, "Worker threads")->capture_default_str()
        ->check(CLI::PositiveNumber);

    SelftestArgs sa;
    auto* st = app.add_subcommand("selftest", "Run gradient and metric oracle checks");
    st->add_option("--instances", sa.instances, "Gradient-check instances")
        ->capture_default_str()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
        if (tr->parsed()) {
            ta.seed = seed ? *seed : fallback_seed();
            if (ta.log.empty()) ta.log = ta.out + ".log.jsonl";
        }
        if (ev->parsed() && ea.ref_corpus.empty()) ea.ref_corpus = ea.corpus;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        auto* failing = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << failing->help();
        return kExitUsage;
    }

    try {
        if (pre->parsed()) {
            std::cerr << "config: " << echo(pa) << '\n';
            return do_preprocess(pa);
        }
        if (tr->parsed()) {
            std::cerr << "config: " << echo(ta) << '\n';
            return do_train(ta);
        }
        if (ev->parsed()) {
            std::cerr << "config: " << echo(ea) << '\n';
            return do_eval(ea);
        }
        if (ex->parsed()) {
            std::cerr << "config: " << echo(xa) << '\n';
            return do_export(xa);
        }
        std::cerr << "config: tsctm selftest --instances " << sa.instances << '\n';
        return do_selftest(sa);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace tsctm::cli
