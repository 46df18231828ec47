#include "ssimnet/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "ssimnet/error.hpp"
#include "ssimnet/layers.hpp"
#include "ssimnet/optim.hpp"

namespace ssimnet {

Tensor sign(const Tensor& g) {
    if (!g.all_finite()) throw numeric_error("sign: input has non-finite values");
    Tensor out(g.shape());
    const double* src = g.data();
    double* dst = out.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        dst[i] = src[i] > 0.0 ? 1.0 : (src[i] < 0.0 ? -1.0 : 0.0);
    }
    return out;
}

void AttackConfig::validate() const {
    if (epsilons.empty()) throw config_error("attack: epsilon sweep is empty");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!std::isfinite(epsilons[i]) || epsilons[i] < 0.0) {
            throw config_error("attack: epsilons must be finite and >= 0");
        }
        if (i && epsilons[i] < epsilons[i - 1]) {
            throw config_error("attack: epsilons must be sorted ascending");
        }
    }
    if (batch_size == 0) throw config_error("attack: batch_size must be positive");
    for (double s : channel_scale) {
        if (!std::isfinite(s) || s <= 0.0) {
            throw config_error("attack: channel scales must be finite and positive");
        }
    }
}

Tensor fgsm(Model& model, const Tensor& x, std::span<const int> targets, double epsilon,
            std::span<const double> channel_scale) {
    if (!std::isfinite(epsilon) || epsilon < 0.0) {
        throw config_error("fgsm: epsilon must be finite and >= 0");
    }
    const Shape4 in = Shape4::from_tensor(x);
    if (!channel_scale.empty() && channel_scale.size() != in.c) {
        throw shape_error("fgsm: channel_scale covers " + std::to_string(channel_scale.size()) +
                          " channels, input has " + std::to_string(in.c));
    }

    model.zero_grads();
    const Tensor logits = model.forward(x, true);
    const SoftmaxXentResult sm = softmax_xent(logits, targets);
    const Tensor grad_x = model.backward(sm.grad_logits);
    model.zero_grads();

    const Tensor s = sign(grad_x);
    Tensor adv = x;
    double* a = adv.data();
    const double* sv = s.data();
    const std::size_t plane = in.h * in.w;
    for (std::size_t n = 0; n < in.n; ++n) {
        for (std::size_t c = 0; c < in.c; ++c) {
            const double step = epsilon * (channel_scale.empty() ? 1.0 : channel_scale[c]);
            double* ap = a + (n * in.c + c) * plane;
            const double* sp = sv + (n * in.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) ap[i] += step * sp[i];
        }
    }
    return adv;
}

namespace {

bool topk_hit(const double* row, std::size_t k, std::size_t classes, std::size_t target) {
    std::size_t better = 0, tied_lower = 0;
    const double t = row[target];
    for (std::size_t j = 0; j < classes; ++j) {
        if (row[j] > t) ++better;
        else if (row[j] == t && j < target) ++tied_lower;
    }
    return better + tied_lower < k;
}

}  // namespace

double topk_accuracy(const Tensor& logits, std::span<const int> targets, std::size_t k) {
    if (logits.rank() != 2) throw shape_error("topk_accuracy: logits must be (batch, classes)");
    if (k == 0) throw config_error("topk_accuracy: k must be positive");
    const std::size_t n = logits.shape()[0];
    const std::size_t classes = logits.shape()[1];
    if (targets.size() != n) throw shape_error("topk_accuracy: targets do not match the batch");
    std::size_t hits = 0;
    for (std::size_t s = 0; s < n; ++s) {
        const int t = targets[s];
        if (t < 0 || static_cast<std::size_t>(t) >= classes) {
            throw data_error("topk_accuracy: target out of range");
        }
        if (topk_hit(logits.data() + s * classes, k, classes, static_cast<std::size_t>(t))) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

namespace {

struct SplitHits {
    double top1 = 0.0;
    double top5 = 0.0;
};

SplitHits attack_split(Model& model, const DatasetSplit& split, double epsilon,
                       const AttackConfig& attack) {
    const std::size_t n = split.records.size();
    if (n == 0) throw config_error("attack: empty split");
    const std::size_t threads = resolve_threads(attack.threads);

    std::vector<Model> replicas;
    const std::size_t t = std::min<std::size_t>(std::max<std::size_t>(threads, 1), n);
    replicas.reserve(t);
    for (std::size_t w = 0; w < t; ++w) replicas.emplace_back(model);

    std::vector<unsigned char> hit1(n, 0), hit5(n, 0);
    std::vector<std::exception_ptr> errors(t);
    const std::size_t chunk = (n + t - 1) / t;
    auto worker = [&](std::size_t w) {
        try {
            Model& m = replicas[w];
            const std::size_t begin = std::min(w * chunk, n);
            const std::size_t end = std::min(begin + chunk, n);
            for (std::size_t b0 = begin; b0 < end; b0 += attack.batch_size) {
                const std::size_t bn = std::min(attack.batch_size, end - b0);
                const auto& img_shape = split.records[b0].pixels.shape();
                if (img_shape.size() != 3) {
                    throw shape_error("attack: records must be (C, H, W)");
                }
                Tensor x({bn, img_shape[0], img_shape[1], img_shape[2]});
                std::vector<int> targets(bn);
                const std::size_t img_len = img_shape[0] * img_shape[1] * img_shape[2];
                for (std::size_t s = 0; s < bn; ++s) {
                    const ImageRecord& rec = split.records[b0 + s];
                    std::copy(rec.pixels.data(), rec.pixels.data() + img_len,
                              x.data() + s * img_len);
                    targets[s] = rec.label;
                }
                const Tensor adv = fgsm(m, x, targets, epsilon, attack.channel_scale);
                const Tensor logits = m.forward(adv, false);
                const std::size_t classes = logits.shape()[1];
                for (std::size_t s = 0; s < bn; ++s) {
                    const double* row = logits.data() + s * classes;
                    const auto target = static_cast<std::size_t>(targets[s]);
                    hit1[b0 + s] = topk_hit(row, 1, classes, target) ? 1 : 0;
                    hit5[b0 + s] = topk_hit(row, 5, classes, target) ? 1 : 0;
                }
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < t; ++w) pool.emplace_back(worker, w);
    worker(0);
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }

    std::size_t h1 = 0, h5 = 0;
    for (std::size_t s = 0; s < n; ++s) {
        h1 += hit1[s];
        h5 += hit5[s];
    }
    SplitHits out;
    out.top1 = static_cast<double>(h1) / static_cast<double>(n);
    out.top5 = static_cast<double>(h5) / static_cast<double>(n);
    return out;
}

}  // namespace

RobustnessReport robustness_sweep(Model& model, const std::string& model_id,
                                  const DatasetSplit& train, const DatasetSplit& validation,
                                  const AttackConfig& attack,
                                  const std::string& epsilon_domain) {
    attack.validate();
    RobustnessReport report;
    report.model_id = model_id;
    report.epsilon_domain = epsilon_domain;
    for (double eps : attack.epsilons) {
        for (const DatasetSplit* split : {&train, &validation}) {
            const SplitHits hits = attack_split(model, *split, eps, attack);
            report.rows.push_back(
                {model_id, to_string(split->role), eps, hits.top1, hits.top5});
        }
    }
    return report;
}

}  // namespace ssimnet
