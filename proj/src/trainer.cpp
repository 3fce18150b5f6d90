#include "tsctm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "tsctm/parallel.hpp"

namespace tsctm {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
    if (num_topics < 1) throw std::invalid_argument("K must be >= 1");
    if (hidden < 1) throw std::invalid_argument("hidden must be >= 1");
    if (encoder_layers < 1 || encoder_layers > 2) {
        throw std::invalid_argument("encoder_layers must be 1 or 2");
    }
    if (!(loss.tsc.tau > 0.0)) throw std::invalid_argument("tau must be > 0");
    if (loss.tsc.lambda_tsc < 0.0 || loss.tsc.lambda_original < 0.0 || loss.lambda_commit < 0.0) {
        throw std::invalid_argument("loss weights must be >= 0");
    }
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

std::string to_json_line(const EpochRecord& rec) {
    nlohmann::json j;
    j["epoch"] = rec.epoch;
    j["recon"] = rec.loss.recon;
    j["codebook"] = rec.loss.codebook;
    j["commit"] = rec.loss.commit;
    j["tsc"] = rec.loss.tsc;
    j["total"] = rec.loss.total;
    j["usage"] = rec.usage;
    j["seconds"] = rec.seconds;
    return j.dump();
}

namespace {

void check_finite(const LossBreakdown& l, std::size_t epoch, std::size_t step) {
    const std::pair<const char*, double> terms[] = {
        {"recon", l.recon}, {"codebook", l.codebook}, {"commit", l.commit}, {"tsc", l.tsc},
        {"total", l.total}};
    for (auto [name, v] : terms) {
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "non-finite loss term '" << name << "' (" << v << ") at epoch " << epoch
                << ", step " << step;
            throw std::runtime_error(msg.str());
        }
    }
}

std::filesystem::path periodic_path(const std::filesystem::path& base, std::size_t epoch) {
    auto p = base;
    p += ".epoch" + std::to_string(epoch);
    return p;
}

}  // namespace

std::pair<ModelParams, TrainLog> train(const Corpus& corpus, const TrainConfig& cfg,
                                       const EpochCallback& on_epoch) {
    cfg.validate();
    if (cfg.augmented && !corpus.has_augmentation()) {
        throw std::invalid_argument(
            "augmented training requires a corpus with paired augmentations (aug_docs missing)");
    }
    if (corpus.docs.empty()) throw std::invalid_argument("train: empty corpus");

    Rng rng(cfg.seed);
    ModelParams params = init_params(
        {corpus.vocab.size(), cfg.num_topics, cfg.hidden, cfg.encoder_layers, cfg.batch_norm},
        rng);
    AdamState adam({cfg.lr}, params.tensor_sizes());

    const std::size_t N = corpus.docs.size();
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    // Bag-of-words rows are computed once and gathered per batch.
    const std::vector<BowRow> rows = [&] {
        std::vector<BowRow> r;
        for (const auto& d : corpus.docs) r.push_back(to_bow_row(d));
        return r;
    }();
    std::vector<BowRow> aug_rows;
    if (cfg.augmented) {
        for (const auto& d : *corpus.aug_docs) aug_rows.push_back(to_bow_row(d));
    }

    TrainLog log;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        rng.shuffle(order);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.usage.assign(cfg.num_topics, 0);
        std::size_t steps = 0;
        for (std::size_t lo = 0; lo < N; lo += cfg.batch_size) {
            const std::size_t hi = std::min(N, lo + cfg.batch_size);
            BowBatch batch;
            if (cfg.augmented) batch.aug_rows.emplace();
            for (std::size_t k = lo; k < hi; ++k) {
                batch.rows.push_back(rows[order[k]]);
                if (cfg.augmented) batch.aug_rows->push_back(aug_rows[order[k]]);
            }
            TotalLossResult step =
                total_loss(params, batch, cfg.loss, cfg.augmented, {}, cfg.threads);
            check_finite(step.loss, epoch, steps + 1);
            const auto grads = std::as_const(step.grad).tensors();
            adam_step(params.tensors(), grads, adam);
            rec.loss += step.loss;
            for (std::size_t q : step.q) ++rec.usage[q];
            ++steps;
        }
        rec.loss = rec.loss.scaled(1.0 / static_cast<double>(steps));
        if (!params.all_finite()) {
            throw std::runtime_error("non-finite parameters after epoch " + std::to_string(epoch));
        }
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (cfg.checkpoint_path && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 &&
            epoch != cfg.epochs) {
            set_norm_stats(params, rows, cfg.threads);
            save_checkpoint(params, periodic_path(*cfg.checkpoint_path, epoch));
        }
        if (on_epoch) on_epoch(rec);
        log.epochs.push_back(std::move(rec));
    }
    set_norm_stats(params, rows, cfg.threads);
    if (cfg.checkpoint_path) save_checkpoint(params, *cfg.checkpoint_path);
    return {std::move(params), std::move(log)};
}

Matrix infer_theta(const ModelParams& params, const Vocabulary& vocab,
                   const std::vector<Document>& docs, std::size_t threads) {
    if (vocab.size() != params.vocab_size()) {
        throw std::invalid_argument("infer_theta: corpus vocabulary size " +
                                    std::to_string(vocab.size()) + " does not match model (" +
                                    std::to_string(params.vocab_size()) + ")");
    }
    Matrix theta(docs.size(), params.num_topics());
    parallel_for(docs.size(), threads, [&](std::size_t i) {
        const Encoding enc = encode(params, to_bow_row(docs[i]));
        std::copy(enc.theta.begin(), enc.theta.end(), theta.row(i).begin());
    });
    return theta;
}

Matrix infer_theta(const ModelParams& params, const Corpus& corpus, std::size_t threads) {
    return infer_theta(params, corpus.vocab, corpus.docs, threads);
}

}  // namespace tsctm
