#pragma once

// The full single-stage restoration-and-fusion network: per-modality encoders,
// prompt generation, infrared-assisted feature restoration gated by haze
// density, and the five-stage prompt-embedding fusion path. Every module that
// the ablation table removes is constructible away by configuration.

#include <string>
#include <vector>

#include "irvf/blocks.hpp"
#include "irvf/graph.hpp"
#include "irvf/haze.hpp"
#include "irvf/params.hpp"
#include "irvf/rng.hpp"

namespace irvf {

struct AblationFlags {
    bool no_f_ir = false;    // drop the infrared assistance path entirely
    bool no_hde = false;     // add F_ir_hat and F_vi directly instead of the haze blend
    bool no_p_ir = false;    // inject encoder F_ir without prompt or PEB
    bool no_fr_peb = false;  // add prompt to F_ir instead of running the PEB
    bool no_p_vi = false;    // fusion stages run without prompts
    bool no_fb_peb = false;  // fusion stages use concat+conv instead of the PEB
};

struct ModelConfig {
    int channels = 16;
    int heads = 1;
    double ffn_expansion = 2.66;
    int encoder_blocks = 2;
    int pool_size = 32;
    int fusion_stages = 5;
    bool shared_encoder = false;       // share encoder trunk between modalities
    bool fusion_regen_prompts = false; // regenerate fusion prompts per stage instead of 1x1 adjust
    HdeOptions hde;
    AblationFlags ablation;
};

struct EncoderRef {
    ConvRef embed;                 // 3x3, in -> C
    std::vector<BlockRef> blocks;  // C-wide transformer blocks
    ConvRef out;                   // 3x3, C -> C; zeroing it zeroes the features
};

struct FusionStageRef {
    ConvRef prompt_adjust;  // 1x1 prompt channel adjustment (stages 2..)
    BlockRef body;
    PebRef peb;
    ConvRef concat_fuse;  // used only under no_fb_peb
};

template <typename T>
class Model {
public:
    Model(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) { build(rng); }

    const ModelConfig& config() const { return cfg_; }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }

    int fusion_stage_count() const { return static_cast<int>(stages_.size()); }

    struct Forward {
        using Id = typename Graph<T>::Id;
        Id f_vi = Graph<T>::kNone;       // encoder output, visible
        Id f_ir = Graph<T>::kNone;       // encoder output, infrared
        Id prompt_ir = Graph<T>::kNone;  // restoration prompt
        Id f_ir_hat = Graph<T>::kNone;   // compensated infrared features
        Id haze = Graph<T>::kNone;       // haze density map (1,H,W)
        Id blend = Graph<T>::kNone;      // pre-transformer blend
        Id f_vi_hat = Graph<T>::kNone;   // restored visible features
        Id dehazed = Graph<T>::kNone;    // (3,H,W), unclamped
        Id fused = Graph<T>::kNone;      // (3,H,W), unclamped
    };

    using Id = typename Graph<T>::Id;

    Id encode(Graph<T>& g, const BoundIds<T>& bound, const EncoderRef& enc, Id image) const {
        auto x = apply_conv(g, bound, enc.embed, image);
        for (const auto& b : enc.blocks) x = apply_block(g, bound, b, x);
        return apply_conv(g, bound, enc.out, x);
    }

    std::pair<Id, Id> encode_pair(Graph<T>& g, const BoundIds<T>& bound, Id img_ir, Id img_vi) const {
        const Shape si = g.value(img_ir).shape();
        const Shape sv = g.value(img_vi).shape();
        if (si.h != sv.h || si.w != sv.w) {
            throw std::invalid_argument("encode_pair: images are not registered, " + si.str() +
                                        " vs " + sv.str());
        }
        return {encode(g, bound, enc_ir_, img_ir), encode(g, bound, enc_vi_, img_vi)};
    }

    // Restoration path (IA-FRM). Fills everything up to `dehazed`.
    void restore(Graph<T>& g, const BoundIds<T>& bound, Forward& fw) const {
        const AblationFlags& ab = cfg_.ablation;
        if (ab.no_f_ir) {
            fw.f_vi_hat = apply_block(g, bound, tf_restore_, fw.f_vi);
        } else {
            if (!ab.no_p_ir) {
                fw.prompt_ir = apply_pgm(g, bound, pgm_ir_, fw.f_vi, fw.f_ir);
                fw.f_ir_hat = ab.no_fr_peb ? g.add(fw.f_ir, fw.prompt_ir)
                                           : apply_peb(g, bound, peb_restore_, fw.f_ir, fw.prompt_ir);
            } else {
                fw.f_ir_hat = fw.f_ir;
            }
            if (ab.no_hde) {
                fw.blend = g.add(fw.f_ir_hat, fw.f_vi);
            } else {
                const auto est = haze_density_g(g, fw.f_vi, cfg_.hde);
                fw.haze = est.density;
                fw.blend = haze_guided_blend(g, fw.f_ir_hat, fw.f_vi, fw.haze);
            }
            fw.f_vi_hat = apply_block(g, bound, tf_restore_, fw.blend);
        }
        fw.dehazed = apply_conv(g, bound, dehaze_head_, fw.f_vi_hat);
    }

    // F_ir_hat (.) H + F_vi (.) (1 - H) + F_vi. The visible terms are summed
    // first so constant-H identities land on the exact coefficient.
    static Id haze_guided_blend(Graph<T>& g, Id f_ir_hat, Id f_vi, Id haze) {
        const auto one_minus_h = g.add_scalar(g.mul_scalar(haze, T(-1)), T(1));
        const auto injected = g.mul(f_ir_hat, haze);
        const auto kept = g.mul(f_vi, one_minus_h);
        return g.add(injected, g.add(kept, f_vi));
    }

    // Fusion path (MsPE-FM). Requires f_vi_hat and f_ir.
    void fuse(Graph<T>& g, const BoundIds<T>& bound, Forward& fw) const {
        const AblationFlags& ab = cfg_.ablation;
        const auto cat = g.concat_channels(fw.f_vi_hat, fw.f_ir);
        const auto stage_in = apply_conv(g, bound, fuse_in_, cat);

        Id prompt = Graph<T>::kNone;
        if (!ab.no_p_vi) prompt = apply_pgm(g, bound, pgm_vi_, fw.f_vi_hat, fw.f_ir);

        Id x = stage_in;
        Id stage3_out = Graph<T>::kNone;
        for (int s = 0; s < static_cast<int>(stages_.size()); ++s) {
            const FusionStageRef& st = stages_[static_cast<std::size_t>(s)];
            if (!ab.no_p_vi && s > 0) {
                prompt = cfg_.fusion_regen_prompts ? apply_pgm(g, bound, pgm_vi_, x, fw.f_ir)
                                                   : apply_conv(g, bound, st.prompt_adjust, prompt);
            }
            x = apply_block(g, bound, st.body, x);
            if (!ab.no_p_vi) {
                x = ab.no_fb_peb ? apply_conv(g, bound, st.concat_fuse, g.concat_channels(x, prompt))
                                 : apply_peb(g, bound, st.peb, x, prompt);
            }
            if (s == 2) {
                x = g.add(x, stage_in);
                stage3_out = x;
            } else if (s == 4 && stage3_out != Graph<T>::kNone) {
                x = g.add(x, stage3_out);
            }
        }
        fw.fused = apply_conv(g, bound, fuse_out_, x);
    }

    Forward forward(Graph<T>& g, const BoundIds<T>& bound, Id img_ir, Id img_vi) const {
        Forward fw;
        auto [f_ir, f_vi] = encode_pair(g, bound, img_ir, img_vi);
        fw.f_ir = f_ir;
        fw.f_vi = f_vi;
        restore(g, bound, fw);
        fuse(g, bound, fw);
        return fw;
    }

    // Accessors used by targeted tests.
    const EncoderRef& encoder_ir() const { return enc_ir_; }
    const EncoderRef& encoder_vi() const { return enc_vi_; }
    const PromptPoolRef& pgm_ir() const { return pgm_ir_; }
    const PromptPoolRef& pgm_vi() const { return pgm_vi_; }
    const PebRef& peb_restore() const { return peb_restore_; }
    const BlockRef& tf_restore() const { return tf_restore_; }
    const ConvRef& dehaze_head() const { return dehaze_head_; }
    const ConvRef& fuse_in() const { return fuse_in_; }
    const ConvRef& fuse_out() const { return fuse_out_; }
    const std::vector<FusionStageRef>& fusion_stages() const { return stages_; }

private:
    void build(Rng& rng) {
        auto& ps = params_;
        const int c = cfg_.channels;
        const AblationFlags& ab = cfg_.ablation;

        enc_ir_.embed = detail::register_conv(ps, rng, "enc_ir.embed", c, 1, 3, 1, 1);
        for (int i = 0; i < cfg_.encoder_blocks; ++i) {
            enc_ir_.blocks.push_back(register_block(ps, rng, "enc_ir.block" + std::to_string(i), c,
                                                    cfg_.heads, cfg_.ffn_expansion));
        }
        enc_ir_.out = detail::register_conv(ps, rng, "enc_ir.out", c, c, 3, 1, 1);

        enc_vi_.embed = detail::register_conv(ps, rng, "enc_vi.embed", c, 3, 3, 1, 1);
        if (cfg_.shared_encoder) {
            enc_vi_.blocks = enc_ir_.blocks;
            enc_vi_.out = enc_ir_.out;
        } else {
            for (int i = 0; i < cfg_.encoder_blocks; ++i) {
                enc_vi_.blocks.push_back(register_block(ps, rng, "enc_vi.block" + std::to_string(i), c,
                                                        cfg_.heads, cfg_.ffn_expansion));
            }
            enc_vi_.out = detail::register_conv(ps, rng, "enc_vi.out", c, c, 3, 1, 1);
        }

        if (!ab.no_f_ir && !ab.no_p_ir) {
            pgm_ir_ = register_prompt_pool(ps, rng, "pgm_ir", c, cfg_.pool_size);
            if (!ab.no_fr_peb) {
                peb_restore_ = register_peb(ps, rng, "fr_peb", c, cfg_.heads, cfg_.ffn_expansion);
            }
        }
        tf_restore_ = register_block(ps, rng, "restore.tf", c, cfg_.heads, cfg_.ffn_expansion);
        dehaze_head_ = detail::register_conv(ps, rng, "restore.head", 3, c, 3, 1, 1);

        fuse_in_ = detail::register_conv(ps, rng, "fusion.in", c, 2 * c, 1, 1, 0);
        if (!ab.no_p_vi) pgm_vi_ = register_prompt_pool(ps, rng, "pgm_vi", c, cfg_.pool_size);
        for (int s = 0; s < cfg_.fusion_stages; ++s) {
            const std::string name = "fusion.stage" + std::to_string(s);
            FusionStageRef st;
            st.body = register_block(ps, rng, name + ".body", c, cfg_.heads, cfg_.ffn_expansion);
            if (!ab.no_p_vi) {
                if (s > 0 && !cfg_.fusion_regen_prompts) {
                    st.prompt_adjust = detail::register_conv(ps, rng, name + ".prompt_adjust", c, c, 1, 1, 0);
                }
                if (ab.no_fb_peb) {
                    st.concat_fuse = detail::register_conv(ps, rng, name + ".concat_fuse", c, 2 * c, 1, 1, 0);
                } else {
                    st.peb = register_peb(ps, rng, name + ".peb", c, cfg_.heads, cfg_.ffn_expansion);
                }
            }
            stages_.push_back(st);
        }
        fuse_out_ = detail::register_conv(ps, rng, "fusion.out", 3, c, 1, 1, 0);
    }

    ModelConfig cfg_;
    ParamStore<T> params_;
    EncoderRef enc_ir_, enc_vi_;
    PromptPoolRef pgm_ir_, pgm_vi_;
    PebRef peb_restore_;
    BlockRef tf_restore_;
    ConvRef dehaze_head_;
    ConvRef fuse_in_, fuse_out_;
    std::vector<FusionStageRef> stages_;
};

}  // namespace irvf
