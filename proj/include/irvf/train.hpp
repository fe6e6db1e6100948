#pragma once

// Training harness: batch sampling with crops and flips, per-sample
// forward/backward, deterministic gradient reduction, AdamW with a cosine
// schedule, and checkpoint capture.
//
// Reproducibility contract: one generator seeded from the config drives, in
// order, (1) parameter initialization in registration order, then (2) per
// step and batch slot: sample index, crop y, crop x, flip-h coin, flip-v
// coin. Gradients are reduced in slot order regardless of worker count, so
// fixed-seed runs are bitwise identical.

#include <algorithm>
#include <filesystem>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "irvf/checkpoint.hpp"
#include "irvf/config.hpp"
#include "irvf/graph.hpp"
#include "irvf/losses.hpp"
#include "irvf/model.hpp"
#include "irvf/optim.hpp"
#include "irvf/png_io.hpp"
#include "irvf/rng.hpp"

namespace irvf {

template <typename T>
struct TrainSample {
    Tensor<T> ir;    // (1,H,W)
    Tensor<T> hazy;  // (3,H,W)
    Tensor<T> gt;    // (3,H,W)
};

struct StepLog {
    int step = 0;
    double lr = 0.0;
    double l_int = 0.0;
    double l_grad = 0.0;
    double l_1 = 0.0;
    double l_total = 0.0;
};

template <typename T>
struct InferenceResult {
    Tensor<T> dehazed;  // clamped to [0,1]
    Tensor<T> fused;    // clamped to [0,1]
    Tensor<T> haze;     // (1,H,W), empty when the HDE path is ablated
};

template <typename T>
class Trainer {
public:
    explicit Trainer(const TrainConfig& cfg)
        : cfg_(cfg), rng_(cfg.seed), model_(cfg.model, rng_),
          opt_(0.9, 0.999, 1e-8, cfg.weight_decay) {
        cfg_.validate();
        opt_.attach(model_.params());
    }

    Model<T>& model() { return model_; }
    const TrainConfig& config() const { return cfg_; }

    void set_dataset(std::vector<TrainSample<T>> samples) {
        for (const auto& s : samples) validate_sample(s);
        data_ = std::move(samples);
    }

    void load_dataset(const std::string& dir) {
        namespace fs = std::filesystem;
        const fs::path ir_dir = fs::path(dir) / "ir";
        const fs::path hazy_dir = fs::path(dir) / "vis_hazy";
        const fs::path gt_dir = fs::path(dir) / "vis_gt";
        if (!fs::is_directory(ir_dir) || !fs::is_directory(hazy_dir)) {
            throw std::runtime_error("dataset: expected ir/ and vis_hazy/ under " + dir);
        }
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(ir_dir)) {
            if (e.path().extension() == ".png") names.push_back(e.path().filename().string());
        }
        std::sort(names.begin(), names.end());
        if (names.empty()) throw std::runtime_error("dataset: no PNG pairs under " + dir);
        std::vector<TrainSample<T>> samples;
        for (const auto& name : names) {
            TrainSample<T> s;
            s.ir = read_png_gray((ir_dir / name).string()).template cast<T>();
            s.hazy = read_png((hazy_dir / name).string()).template cast<T>();
            const fs::path gt = gt_dir / name;
            if (!fs::exists(gt)) {
                throw std::runtime_error("dataset: missing ground truth vis_gt/" + name);
            }
            s.gt = read_png(gt.string()).template cast<T>();
            samples.push_back(std::move(s));
        }
        set_dataset(std::move(samples));
    }

    int total_steps() const {
        if (cfg_.steps > 0) return cfg_.steps;
        const int n = static_cast<int>(data_.size());
        const int per_epoch = std::max(1, (n + cfg_.batch_size - 1) / cfg_.batch_size);
        return cfg_.epochs * per_epoch;
    }

    StepLog step() {
        if (data_.empty()) throw std::runtime_error("train: dataset is empty");
        const int steps = total_steps();
        const double lr = cosine_lr(step_index_, steps, cfg_.lr_init, cfg_.lr_final);

        // Draw the whole batch plan up front so the RNG stream is independent
        // of worker scheduling.
        struct Slot {
            int sample, cy, cx;
            bool flip_h, flip_v;
        };
        std::vector<Slot> plan(static_cast<std::size_t>(cfg_.batch_size));
        for (auto& s : plan) {
            s.sample = rng_.uniform_int(static_cast<int>(data_.size()));
            const auto& d = data_[static_cast<std::size_t>(s.sample)];
            const int crop = effective_crop(d);
            s.cy = rng_.uniform_int(d.ir.h() - crop + 1);
            s.cx = rng_.uniform_int(d.ir.w() - crop + 1);
            s.flip_h = cfg_.augment && rng_.coin();
            s.flip_v = cfg_.augment && rng_.coin();
        }

        const int nparams = model_.params().count();
        std::vector<std::vector<Tensor<T>>> slot_grads(plan.size());
        std::vector<TotalLossValues> slot_losses(plan.size());
        std::vector<std::exception_ptr> errors(plan.size());

        const int workers = std::max(1, cfg_.workers > 0
                                            ? cfg_.workers
                                            : static_cast<int>(std::thread::hardware_concurrency()));
        auto run_slot = [&](std::size_t slot_idx) {
            try {
                const Slot& s = plan[slot_idx];
                const auto& d = data_[static_cast<std::size_t>(s.sample)];
                const int crop = effective_crop(d);
                TrainSample<T> view;
                view.ir = crop_flip(d.ir, s.cy, s.cx, crop, s.flip_h, s.flip_v);
                view.hazy = crop_flip(d.hazy, s.cy, s.cx, crop, s.flip_h, s.flip_v);
                view.gt = crop_flip(d.gt, s.cy, s.cx, crop, s.flip_h, s.flip_v);

                Graph<T> g;
                const auto bound = model_.params().bind(g, true);
                const auto img_ir = g.leaf(view.ir, false);
                const auto img_vi = g.leaf(view.hazy, false);
                const auto gt = g.leaf(view.gt, false);
                const auto fw = model_.forward(g, bound, img_ir, img_vi);
                const auto loss = total_loss_g(g, fw.fused, fw.dehazed, img_ir, gt, cfg_.loss());
                g.backward(loss.total);

                slot_losses[slot_idx] = {static_cast<double>(g.scalar(loss.l1)),
                                         static_cast<double>(g.scalar(loss.grad)),
                                         static_cast<double>(g.scalar(loss.intensity)),
                                         static_cast<double>(g.scalar(loss.total))};
                auto& grads = slot_grads[slot_idx];
                grads.reserve(static_cast<std::size_t>(nparams));
                for (int p = 0; p < nparams; ++p) grads.push_back(g.grad(bound[static_cast<std::size_t>(p)]));
            } catch (...) {
                errors[slot_idx] = std::current_exception();
            }
        };

        if (workers == 1 || plan.size() == 1) {
            for (std::size_t i = 0; i < plan.size(); ++i) run_slot(i);
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    for (std::size_t i = static_cast<std::size_t>(w); i < plan.size();
                         i += static_cast<std::size_t>(workers)) {
                        run_slot(i);
                    }
                });
            }
            for (auto& t : pool) t.join();
        }
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }

        // Deterministic reduction in slot order.
        std::vector<Tensor<T>> grads;
        grads.reserve(static_cast<std::size_t>(nparams));
        for (int p = 0; p < nparams; ++p) grads.emplace_back(model_.params().tensor(p).shape());
        const T inv_batch = static_cast<T>(1.0 / static_cast<double>(plan.size()));
        for (std::size_t s = 0; s < plan.size(); ++s) {
            for (int p = 0; p < nparams; ++p) {
                Tensor<T>& acc = grads[static_cast<std::size_t>(p)];
                const Tensor<T>& sg = slot_grads[s][static_cast<std::size_t>(p)];
                for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += sg[i];
            }
        }
        for (auto& gt : grads) {
            for (std::size_t i = 0; i < gt.size(); ++i) gt[i] *= inv_batch;
        }
        opt_.step(model_.params(), grads, lr);

        StepLog row;
        row.step = step_index_;
        row.lr = lr;
        for (std::size_t s = 0; s < plan.size(); ++s) {
            row.l_1 += slot_losses[s].l1;
            row.l_grad += slot_losses[s].grad;
            row.l_int += slot_losses[s].intensity;
            row.l_total += slot_losses[s].total;
        }
        const double invb = 1.0 / static_cast<double>(plan.size());
        row.l_1 *= invb;
        row.l_grad *= invb;
        row.l_int *= invb;
        row.l_total *= invb;
        ++step_index_;
        log_.push_back(row);
        return row;
    }

    void run(const std::function<void(const StepLog&)>& on_step = {}) {
        const int steps = total_steps();
        while (step_index_ < steps) {
            const StepLog row = step();
            if (on_step) on_step(row);
        }
    }

    const std::vector<StepLog>& log() const { return log_; }

    std::string loss_csv() const {
        std::ostringstream out;
        out.precision(17);
        out << "step,lr,l_int,l_grad,l_1,l_total\n";
        for (const auto& r : log_) {
            out << r.step << ',' << r.lr << ',' << r.l_int << ',' << r.l_grad << ',' << r.l_1 << ','
                << r.l_total << "\n";
        }
        return out.str();
    }

    Checkpoint make_checkpoint() const {
        Checkpoint ck;
        ck.step = static_cast<std::uint32_t>(step_index_);
        ck.config_text = serialize_config(cfg_);
        ck.capture_params(model_.params());
        for (int p = 0; p < model_.params().count(); ++p) {
            ck.moments.emplace_back(model_.params().name(p),
                                    opt_.first_moments()[static_cast<std::size_t>(p)].template cast<float>(),
                                    opt_.second_moments()[static_cast<std::size_t>(p)].template cast<float>());
        }
        return ck;
    }

    void restore_checkpoint(const Checkpoint& ck) {
        ck.restore_params(model_.params());
        step_index_ = static_cast<int>(ck.step);
        opt_.attach(model_.params());
        opt_.set_steps_taken(ck.step);
        if (!ck.moments.empty()) {
            if (ck.moments.size() != static_cast<std::size_t>(model_.params().count())) {
                throw std::runtime_error("checkpoint: moment count mismatch");
            }
            for (std::size_t p = 0; p < ck.moments.size(); ++p) {
                opt_.first_moments()[p] = std::get<1>(ck.moments[p]).template cast<T>();
                opt_.second_moments()[p] = std::get<2>(ck.moments[p]).template cast<T>();
            }
        }
    }

    InferenceResult<T> infer(const Tensor<T>& ir, const Tensor<T>& hazy) const {
        Graph<T> g;
        const auto bound = model_.params().bind(g, false);
        const auto img_ir = g.leaf(ir, false);
        const auto img_vi = g.leaf(hazy, false);
        const auto fw = model_.forward(g, bound, img_ir, img_vi);
        InferenceResult<T> out;
        out.dehazed = clamp01(g.value(fw.dehazed));
        out.fused = clamp01(g.value(fw.fused));
        if (fw.haze != Graph<T>::kNone) out.haze = g.value(fw.haze);
        return out;
    }

private:
    struct TotalLossValues {
        double l1 = 0.0, grad = 0.0, intensity = 0.0, total = 0.0;
    };

    void validate_sample(const TrainSample<T>& s) const {
        if (s.ir.c() != 1 || s.hazy.c() != 3 || s.gt.c() != 3) {
            throw std::runtime_error("dataset: expected (1,H,W) ir and (3,H,W) hazy/gt images");
        }
        if (s.ir.h() != s.hazy.h() || s.ir.w() != s.hazy.w() || s.gt.shape() != s.hazy.shape()) {
            throw std::runtime_error("dataset: sample images are not registered");
        }
    }

    int effective_crop(const TrainSample<T>& s) const {
        const int lim = std::min(s.ir.h(), s.ir.w());
        if (cfg_.crop_size > lim) {
            throw std::runtime_error("train: crop_size " + std::to_string(cfg_.crop_size) +
                                     " exceeds image dimension " + std::to_string(lim));
        }
        return cfg_.crop_size;
    }

    static Tensor<T> crop_flip(const Tensor<T>& img, int cy, int cx, int crop, bool fh, bool fv) {
        Tensor<T> out({img.c(), crop, crop});
        for (int c = 0; c < img.c(); ++c) {
            for (int y = 0; y < crop; ++y) {
                const int sy = cy + (fv ? crop - 1 - y : y);
                for (int x = 0; x < crop; ++x) {
                    const int sx = cx + (fh ? crop - 1 - x : x);
                    out.at(c, y, x) = img.at(c, sy, sx);
                }
            }
        }
        return out;
    }

    TrainConfig cfg_;
    Rng rng_;
    Model<T> model_;
    AdamW<T> opt_;
    std::vector<TrainSample<T>> data_;
    std::vector<StepLog> log_;
    int step_index_ = 0;
};

}  // namespace irvf
