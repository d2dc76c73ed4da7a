// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/trainer.hpp"

#include "pspt/error.hpp"
#include "pspt/log.hpp"
#include "pspt/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <set>

namespace pspt {

using nlohmann::ordered_json;

void TrainConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) fail(ErrorKind::Configuration, std::string(name) + " must be positive");
    };
    positive(static_cast<double>(batch_size), "batch_size");
    positive(static_cast<double>(in_batch_negatives), "in_batch_negatives");
    positive(static_cast<double>(early_stop_patience), "early_stop_patience");
    positive(static_cast<double>(train_sample_size), "train_sample_size");
    positive(lr_soft_prompt, "lr_soft_prompt");
    positive(lr_adapter, "lr_adapter");
    positive(clip_norm, "clip_norm");
    positive(adam_eps, "adam_eps");
    if (in_batch_negatives > batch_size) {
        fail(ErrorKind::Configuration, "in_batch_negatives (" + std::to_string(in_batch_negatives) +
                                           ") must not exceed batch_size (" + std::to_string(batch_size) + ")");
    }
    if (!(dev_fraction >= 0.0 && dev_fraction < 1.0)) {
        fail(ErrorKind::Configuration, "dev_fraction must be in [0, 1)");
    }
    if (!(weight_point >= 0.0) || !(weight_pair >= 0.0)) {
        fail(ErrorKind::Configuration, "loss weights must be non-negative");
    }
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        fail(ErrorKind::Configuration, "adam betas must be in [0, 1)");
    }
}

std::vector<TrainingInstance> build_instances(const QaDataset& dataset, const Vocabulary& vocab,
                                              std::uint64_t seed, std::size_t sample_size) {
    std::vector<const QaRecord*> eligible;
    for (const auto& r : dataset.records()) {
        const std::size_t pos = r.relevant_count();
        if (pos == 0 || pos == r.passages.size()) {
            log_info("warning: question '" + r.question_id + "' skipped for training (needs a relevant and a " +
                     "non-relevant passage)");
            continue;
        }
        if (vocab.tokenize(r.question_text).empty()) {
            log_info("warning: question '" + r.question_id + "' skipped for training (empty question text)");
            continue;
        }
        eligible.push_back(&r);
    }
    if (eligible.size() < sample_size) {
        fail(ErrorKind::Data, "train_sample_size is " + std::to_string(sample_size) + " but only " +
                                  std::to_string(eligible.size()) + " questions are eligible for training");
    }
    Rng rng(seed);
    rng.shuffle(eligible);
    eligible.resize(sample_size);
    std::vector<TrainingInstance> out;
    for (const QaRecord* r : eligible) {
        std::vector<const Passage*> pos, neg;
        for (const auto& p : r->passages) (p.relevant ? pos : neg).push_back(&p);
        const Passage* dp = pos[rng.below(pos.size())];
        const Passage* dn = neg[rng.below(neg.size())];
        out.push_back({r->question_id, vocab.tokenize(r->question_text), dp->passage_id, vocab.tokenize(dp->text),
                       dn->passage_id, vocab.tokenize(dn->text)});
    }
    return out;
}

std::vector<TrainPair> expand_in_batch(const std::vector<TrainingInstance>& batch, std::size_t m) {
    std::vector<TrainPair> pairs;
    const std::size_t n = batch.size();
    for (std::size_t i = 0; i < n; ++i) {
        pairs.push_back({i, i, false});
        std::set<std::string> used{batch[i].positive_id, batch[i].negative_id};
        std::size_t taken = 1;
        for (int flag = 1; flag >= 0 && taken < m; --flag) {
            for (std::size_t k = 1; k < n && taken < m; ++k) {
                const std::size_t j = (i + k) % n;
                const std::string& id = flag ? batch[j].positive_id : batch[j].negative_id;
                if (!used.insert(id).second) continue;
                pairs.push_back({i, j, flag == 1});
                ++taken;
            }
        }
    }
    return pairs;
}

template <typename T>
Tensor<T> pair_hinge(const Tensor<T>& loglik_pos, const Tensor<T>& loglik_neg) {
    return relu(sub(loglik_neg, loglik_pos));
}

template <typename T>
Tensor<T> loss_point(std::span<const TokenId> q, std::span<const TokenId> pos, const PsptParams<T>& params,
                     const MicroLM<T>& model, const AssembleOptions& options) {
    return scale(pspt_loglik(q, pos, params, model, options), T(-1));
}

template <typename T>
Tensor<T> loss_pair(std::span<const TokenId> q, std::span<const TokenId> pos, std::span<const TokenId> neg,
                    const PsptParams<T>& params, const MicroLM<T>& model, const AssembleOptions& options) {
    return pair_hinge(pspt_loglik(q, pos, params, model, options), pspt_loglik(q, neg, params, model, options));
}

template <typename T>
Tensor<T> loss_total(std::span<const TokenId> q, std::span<const TokenId> pos, std::span<const TokenId> neg,
                     const PsptParams<T>& params, const MicroLM<T>& model, const AssembleOptions& options,
                     double weight_point, double weight_pair) {
    auto lp = pspt_loglik(q, pos, params, model, options);
    auto ln = pspt_loglik(q, neg, params, model, options);
    return add(scale(lp, static_cast<T>(-weight_point)), scale(pair_hinge(lp, ln), static_cast<T>(weight_pair)));
}

template <typename T>
double mean_instance_loss(const std::vector<TrainingInstance>& instances, const MicroLM<T>& model,
                          const PsptParams<T>& params, const TrainConfig& config) {
    if (instances.empty()) return 0.0;
    auto frozen = params.clone();
    frozen.set_trainable(false);
    const AssembleOptions opts{config.literal_concat};
    double total = 0.0;
    for (const auto& inst : instances) {
        total += static_cast<double>(loss_total<T>(inst.question, inst.positive, inst.negative, frozen, model, opts,
                                                   config.weight_point, config.weight_pair)
                                         .item());
    }
    return total / static_cast<double>(instances.size());
}

namespace {

template <typename T>
struct AdamState {
    std::vector<double> m, v;
};

} // namespace

template <typename T>
TrainResult train(const TrainConfig& config, const std::vector<TrainingInstance>& instances,
                  const MicroLM<T>& model, PsptParams<T>& params) {
    config.validate();
    if (instances.empty()) fail(ErrorKind::Data, "no training instances");
    if (!model.frozen()) fail(ErrorKind::Contract, "language model parameters must be frozen during training");
    params.set_trainable(true);

    TrainResult result;
    result.model_checksum_before = model.checksum();

    // seeded dev split
    Rng rng(config.seed);
    Rng split_rng = rng.fork(1);
    Rng epoch_rng = rng.fork(2);
    std::vector<std::size_t> order(instances.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    split_rng.shuffle(order);
    std::size_t n_dev = static_cast<std::size_t>(std::floor(config.dev_fraction * instances.size()));
    if (n_dev == 0 && config.dev_fraction > 0.0 && instances.size() >= 2) n_dev = 1;
    std::vector<TrainingInstance> dev, tr;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_dev ? dev : tr).push_back(instances[order[i]]);
    if (tr.empty()) tr = dev;
    if (dev.empty()) dev = tr;

    const std::size_t batches_per_epoch = (tr.size() + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = batches_per_epoch * config.epochs;
    const AssembleOptions opts{config.literal_concat};

    auto tensors = params.named_parameters();
    std::vector<AdamState<T>> adam(tensors.size());
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        adam[i].m.assign(tensors[i].second.numel(), 0.0);
        adam[i].v.assign(tensors[i].second.numel(), 0.0);
    }
    const double lr0[3] = {config.lr_soft_prompt, config.lr_adapter, config.lr_adapter};

    auto dev_record = [&](std::size_t epoch, double loss, bool best) {
        ordered_json j;
        j["epoch"] = epoch;
        j["dev_loss"] = loss;
        j["best"] = best;
        result.log.push_back(j.dump());
    };

    double best = mean_instance_loss(dev, model, params, config);
    if (!std::isfinite(best)) fail(ErrorKind::Numeric, "non-finite dev loss before training");
    result.initial_dev_loss = best;
    result.best_dev_loss = best;
    dev_record(0, best, true);
    PsptParams<T> best_params = params.clone();

    std::size_t step = 0;
    std::size_t stale = 0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::vector<std::size_t> perm(tr.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        epoch_rng.shuffle(perm);
        for (std::size_t b = 0; b < batches_per_epoch; ++b, ++step) {
            std::vector<TrainingInstance> batch;
            for (std::size_t k = b * config.batch_size; k < std::min(tr.size(), (b + 1) * config.batch_size); ++k) {
                batch.push_back(tr[perm[k]]);
            }
            const auto pairs = expand_in_batch(batch, std::min(config.in_batch_negatives, batch.size()));

            std::vector<Tensor<T>> ll_pos;
            for (const auto& inst : batch) ll_pos.push_back(pspt_loglik(inst.question, inst.positive, params, model, opts));
            Tensor<T> total, point_sum, pair_sum;
            for (const auto& p : pairs) {
                const auto& inst = batch[p.query];
                const auto& neg = p.source_positive ? batch[p.source].positive : batch[p.source].negative;
                auto point = scale(ll_pos[p.query], T(-1));
                auto hinge = pair_hinge(ll_pos[p.query], pspt_loglik(inst.question, neg, params, model, opts));
                auto term = add(scale(point, static_cast<T>(config.weight_point)),
                                scale(hinge, static_cast<T>(config.weight_pair)));
                total = total.defined() ? add(total, term) : term;
                point_sum = point_sum.defined() ? add(point_sum, point) : point;
                pair_sum = pair_sum.defined() ? add(pair_sum, hinge) : hinge;
            }
            const T inv = T(1) / static_cast<T>(pairs.size());
            auto loss = scale(total, inv);
            const double loss_value = static_cast<double>(loss.item());
            if (!std::isfinite(loss_value)) {
                fail(ErrorKind::Numeric, "non-finite training loss at step " + std::to_string(step));
            }
            for (auto& [name, t] : tensors) t.zero_grad();
            backward(loss);

            double norm2 = 0.0;
            for (auto& [name, t] : tensors) {
                for (T g : t.grad()) norm2 += static_cast<double>(g) * static_cast<double>(g);
            }
            const double norm = std::sqrt(norm2);
            if (!std::isfinite(norm)) {
                fail(ErrorKind::Numeric, "non-finite gradient at step " + std::to_string(step));
            }
            const double clip = norm > config.clip_norm ? config.clip_norm / norm : 1.0;

            const double decay = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
            const double t1 = static_cast<double>(step + 1);
            const double bc1 = 1.0 - std::pow(config.adam_beta1, t1);
            const double bc2 = 1.0 - std::pow(config.adam_beta2, t1);
            for (std::size_t i = 0; i < tensors.size(); ++i) {
                auto values = tensors[i].second.mutable_data();
                auto grad = tensors[i].second.grad();
                const double lr = lr0[i] * decay;
                auto& st = adam[i];
                for (std::size_t k = 0; k < values.size(); ++k) {
                    const double g = static_cast<double>(grad[k]) * clip;
                    st.m[k] = config.adam_beta1 * st.m[k] + (1.0 - config.adam_beta1) * g;
                    st.v[k] = config.adam_beta2 * st.v[k] + (1.0 - config.adam_beta2) * g * g;
                    const double update = lr * (st.m[k] / bc1) / (std::sqrt(st.v[k] / bc2) + config.adam_eps);
                    values[k] = static_cast<T>(static_cast<double>(values[k]) - update);
                }
            }

            ordered_json j;
            j["step"] = step;
            j["epoch"] = epoch;
            j["lr_g1"] = lr0[0] * decay;
            j["lr_g2"] = lr0[1] * decay;
            j["loss"] = loss_value;
            j["loss_point"] = static_cast<double>(point_sum.item()) / static_cast<double>(pairs.size());
            j["loss_pair"] = static_cast<double>(pair_sum.item()) / static_cast<double>(pairs.size());
            result.log.push_back(j.dump());
        }
        for (auto& [name, t] : tensors) t.zero_grad();

        const double dev_loss = mean_instance_loss(dev, model, params, config);
        if (!std::isfinite(dev_loss)) {
            fail(ErrorKind::Numeric, "non-finite dev loss after epoch " + std::to_string(epoch));
        }
        const bool improved = dev_loss < best;
        dev_record(epoch, dev_loss, improved);
        log_info("epoch " + std::to_string(epoch) + " dev_loss " + std::to_string(dev_loss) +
                 (improved ? " (best)" : ""));
        if (improved) {
            best = dev_loss;
            best_params = params.clone();
            result.best_epoch = epoch;
            result.best_dev_loss = best;
            stale = 0;
        } else if (++stale >= config.early_stop_patience) {
            log_info("early stop after epoch " + std::to_string(epoch));
            break;
        }
    }
    result.steps = step;

    // write the best snapshot back into the caller's buffers
    auto src = best_params.named_parameters();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        auto dst = tensors[i].second.mutable_data();
        auto from = src[i].second.data();
        std::copy(from.begin(), from.end(), dst.begin());
    }
    for (auto& [name, t] : tensors) t.zero_grad();
    result.model_checksum_after = model.checksum();
    return result;
}

#define PSPT_INSTANTIATE(T)                                                                                      \
    template Tensor<T> pair_hinge(const Tensor<T>&, const Tensor<T>&);                                           \
    template Tensor<T> loss_point(std::span<const TokenId>, std::span<const TokenId>, const PsptParams<T>&,      \
                                  const MicroLM<T>&, const AssembleOptions&);                                    \
    template Tensor<T> loss_pair(std::span<const TokenId>, std::span<const TokenId>, std::span<const TokenId>,   \
                                 const PsptParams<T>&, const MicroLM<T>&, const AssembleOptions&);               \
    template Tensor<T> loss_total(std::span<const TokenId>, std::span<const TokenId>, std::span<const TokenId>,  \
                                  const PsptParams<T>&, const MicroLM<T>&, const AssembleOptions&, double,       \
                                  double);                                                                       \
    template double mean_instance_loss(const std::vector<TrainingInstance>&, const MicroLM<T>&,                  \
                                       const PsptParams<T>&, const TrainConfig&);                                \
    template TrainResult train(const TrainConfig&, const std::vector<TrainingInstance>&, const MicroLM<T>&,      \
                               PsptParams<T>&);

PSPT_INSTANTIATE(float)
PSPT_INSTANTIATE(double)

} // namespace pspt
