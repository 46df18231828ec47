#include "ssimnet/optim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

#include "ssimnet/error.hpp"

namespace ssimnet {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw config_error("learning_rate must be a finite value >= 0");
    }
    if (!(momentum >= 0.0) || momentum >= 1.0) {
        throw config_error("momentum must lie in [0, 1)");
    }
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw config_error("weight_decay must be a finite value >= 0");
    }
    if (batch_size == 0) throw config_error("batch_size must be positive");
    if (max_epochs == 0) throw config_error("max_epochs must be positive");
}

std::size_t resolve_threads(std::size_t requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

double global_loss(std::span<const double> sample_losses, const std::vector<ParamRef>& params,
                   double weight_decay) {
    if (sample_losses.empty()) throw config_error("global_loss: no sample losses");
    double sum = 0.0;
    for (double l : sample_losses) sum += l;
    double reg = 0.0;
    if (weight_decay != 0.0) {
        for (const ParamRef& p : params) {
            if (!p.decay) continue;
            const double* w = p.value->data();
            for (std::size_t i = 0; i < p.value->size(); ++i) reg += w[i] * w[i];
        }
    }
    return sum / static_cast<double>(sample_losses.size()) + weight_decay * reg;
}

SgdOptimizer::SgdOptimizer(std::vector<ParamRef> params) : params_(std::move(params)) {
    velocities_.reserve(params_.size());
    for (const ParamRef& p : params_) velocities_.emplace_back(Tensor::zeros(p.value->shape()));
}

void SgdOptimizer::step(const TrainConfig& config) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const ParamRef& p = params_[i];
        double* v = velocities_[i].data();
        double* w = p.value->data();
        const double* g = p.grad->data();
        const double two_wd = p.decay ? 2.0 * config.weight_decay : 0.0;
        for (std::size_t j = 0; j < p.value->size(); ++j) {
            v[j] = config.momentum * v[j] + (g[j] + two_wd * w[j]);
            w[j] -= config.learning_rate * v[j];
        }
    }
}

namespace {

// Runs fn(worker, begin, end) over [0, count) split into `threads`
// contiguous chunks; worker 0 runs on the calling thread. The first
// failing worker's exception is rethrown.
template <typename Fn>
void parallel_chunks(std::size_t count, std::size_t threads, Fn&& fn) {
    const std::size_t t = std::min(std::max<std::size_t>(threads, 1), std::max<std::size_t>(count, 1));
    const std::size_t chunk = (count + t - 1) / t;
    std::vector<std::exception_ptr> errors(t);
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < t; ++w) {
        const std::size_t begin = std::min(w * chunk, count);
        const std::size_t end = std::min(begin + chunk, count);
        pool.emplace_back([&, w, begin, end] {
            try {
                fn(w, begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    try {
        fn(0, 0, std::min(chunk, count));
    } catch (...) {
        errors[0] = std::current_exception();
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

std::size_t argmax_row(const double* logits, std::size_t k) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
        if (logits[j] > logits[best]) best = j;
    }
    return best;
}

Tensor as_batch_of_one(const Tensor& image) {
    std::vector<std::size_t> shape;
    shape.push_back(1);
    for (std::size_t d : image.shape()) shape.push_back(d);
    return image.reshaped(shape);
}

void flatten_grads(const std::vector<ParamRef>& params, std::vector<double>& out) {
    std::size_t off = 0;
    for (const ParamRef& p : params) {
        const double* g = p.grad->data();
        std::copy(g, g + p.grad->size(), out.begin() + static_cast<std::ptrdiff_t>(off));
        off += p.grad->size();
    }
}

void check_finite_params(const std::vector<ParamRef>& params, bool grads, const std::string& when) {
    for (const ParamRef& p : params) {
        const Tensor& t = grads ? *p.grad : *p.value;
        if (!t.all_finite()) {
            throw numeric_error("non-finite " + std::string(grads ? "gradient" : "values") +
                                " in " + p.name + " " + when);
        }
    }
}

}  // namespace

EpochMetrics train_epoch(Model& model, const DatasetSplit& data, const TrainConfig& config,
                         SgdOptimizer& optimizer, std::size_t epoch_index) {
    config.validate();
    const std::size_t n = data.records.size();
    if (n == 0) throw config_error("train_epoch: empty dataset");
    const std::size_t threads = resolve_threads(config.threads);

    // All randomness for the epoch comes from one serial stream, drawn
    // up front: first the shuffle, then one flip flag per slot.
    std::mt19937_64 gen(config.seed + epoch_index);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(gen() % (i + 1));
        std::swap(perm[i], perm[j]);
    }
    std::vector<unsigned char> flip(n, 0);
    if (config.augment) {
        for (std::size_t i = 0; i < n; ++i) flip[i] = static_cast<unsigned char>(gen() & 1u);
    }

    auto master_params = model.params();
    std::size_t grad_len = 0;
    for (const ParamRef& p : master_params) grad_len += p.grad->size();

    std::vector<Model> replicas;
    replicas.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) replicas.emplace_back(model);

    const std::size_t batch = config.batch_size;
    std::vector<std::vector<double>> slots(std::min(batch, n),
                                           std::vector<double>(grad_len, 0.0));
    std::vector<double> sample_loss(std::min(batch, n), 0.0);
    std::vector<unsigned char> sample_hit(std::min(batch, n), 0);

    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += batch) {
        const std::size_t bn = std::min(batch, n - b0);
        for (auto& replica : replicas) replica.copy_params_from(model);
        parallel_chunks(bn, threads, [&](std::size_t w, std::size_t begin, std::size_t end) {
            Model& m = replicas[w];
            auto params = m.params();
            for (std::size_t s = begin; s < end; ++s) {
                const std::size_t idx = perm[b0 + s];
                const ImageRecord& rec = data.records[idx];
                Tensor x = flip[b0 + s] ? horizontal_flip(rec.pixels) : rec.pixels;
                m.zero_grads();
                const Tensor logits = m.forward(as_batch_of_one(x), true);
                const int target = rec.label;
                const SoftmaxXentResult sm = softmax_xent(logits, std::span<const int>(&target, 1));
                m.backward(sm.grad_logits);
                flatten_grads(params, slots[s]);
                sample_loss[s] = sm.loss;
                sample_hit[s] =
                    argmax_row(logits.data(), logits.shape()[1]) ==
                            static_cast<std::size_t>(target)
                        ? 1
                        : 0;
            }
        });

        // Reduce in slot order so the result is thread-count independent.
        model.zero_grads();
        for (std::size_t s = 0; s < bn; ++s) {
            std::size_t off = 0;
            for (const ParamRef& p : master_params) {
                double* g = p.grad->data();
                const double* src = slots[s].data() + off;
                for (std::size_t j = 0; j < p.grad->size(); ++j) g[j] += src[j];
                off += p.grad->size();
            }
        }
        const double inv_bn = 1.0 / static_cast<double>(bn);
        for (const ParamRef& p : master_params) (*p.grad) *= inv_bn;

        const double batch_loss =
            global_loss(std::span<const double>(sample_loss.data(), bn), master_params,
                        config.weight_decay);
        if (!std::isfinite(batch_loss)) {
            check_finite_params(master_params, true,
                                "while reducing epoch " + std::to_string(epoch_index));
            throw numeric_error("training loss became non-finite in epoch " +
                                std::to_string(epoch_index));
        }
        check_finite_params(master_params, true, "in epoch " + std::to_string(epoch_index));
        optimizer.step(config);
        check_finite_params(master_params, false,
                            "after the update in epoch " + std::to_string(epoch_index));

        for (std::size_t s = 0; s < bn; ++s) {
            loss_sum += sample_loss[s];
            hits += sample_hit[s];
        }
    }

    EpochMetrics m;
    m.count = n;
    m.loss = loss_sum / static_cast<double>(n);
    m.accuracy = static_cast<double>(hits) / static_cast<double>(n);
    return m;
}

EpochMetrics evaluate(Model& model, const DatasetSplit& data, std::size_t batch_size,
                      std::size_t threads) {
    const std::size_t n = data.records.size();
    if (n == 0) throw config_error("evaluate: empty dataset");
    if (batch_size == 0) throw config_error("evaluate: batch_size must be positive");
    const std::size_t t = resolve_threads(threads);

    std::vector<double> losses(n, 0.0);
    std::vector<unsigned char> hit(n, 0);
    parallel_chunks(n, t, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            const ImageRecord& rec = data.records[s];
            const Tensor logits = model.forward(as_batch_of_one(rec.pixels), false);
            const int target = rec.label;
            const SoftmaxXentResult sm = softmax_xent(logits, std::span<const int>(&target, 1));
            losses[s] = sm.loss;
            hit[s] = argmax_row(logits.data(), logits.shape()[1]) ==
                             static_cast<std::size_t>(target)
                         ? 1
                         : 0;
        }
    });

    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t s = 0; s < n; ++s) {
        loss_sum += losses[s];
        hits += hit[s];
    }
    EpochMetrics m;
    m.count = n;
    m.loss = loss_sum / static_cast<double>(n);
    m.accuracy = static_cast<double>(hits) / static_cast<double>(n);
    return m;
}

}  // namespace ssimnet
