#include "irvf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace irvf {

namespace {

// Sigmoid parameters of the edge-preservation model, from the metric's
// original publication: kappa_g=-15, sigma_g=0.5 for relative strength,
// kappa_a=-22, sigma_a=0.8 for relative orientation.
constexpr double kKappaG = -15.0;
constexpr double kSigmaG = 0.5;
constexpr double kKappaA = -22.0;
constexpr double kSigmaA = 0.8;

double sigmoid(double kappa, double sigma, double x) {
    return 1.0 / (1.0 + std::exp(kappa * (x - sigma)));
}

// Rescale so that x=0 -> 0 and x=1 -> 1.
double preservation(double kappa, double sigma, double x) {
    const double lo = sigmoid(kappa, sigma, 0.0);
    const double hi = sigmoid(kappa, sigma, 1.0);
    return (sigmoid(kappa, sigma, x) - lo) / (hi - lo);
}

void sobel_pair(const TensorD& gray, TensorD& gx, TensorD& gy) {
    static constexpr int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    static constexpr int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    const int H = gray.h(), W = gray.w();
    gx = TensorD({1, H, W});
    gy = TensorD({1, H, W});
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double sx = 0.0, sy = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                const int yy = std::clamp(y + dy, 0, H - 1);
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = std::clamp(x + dx, 0, W - 1);
                    const double v = gray.at(0, yy, xx);
                    sx += kx[dy + 1][dx + 1] * v;
                    sy += ky[dy + 1][dx + 1] * v;
                }
            }
            gx.at(0, y, x) = sx;
            gy.at(0, y, x) = sy;
        }
    }
}

void require_same(const TensorD& a, const TensorD& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape().str() +
                                    " vs " + b.shape().str());
    }
}

double entropy_term(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

double mutual_information(const TensorD& a, const TensorD& b, int bins) {
    const std::size_t n = a.size();
    std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
    std::vector<double> pa(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> pb(static_cast<std::size_t>(bins), 0.0);
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int ia = std::clamp(static_cast<int>(a[i]) * bins / 256, 0, bins - 1);
        const int ib = std::clamp(static_cast<int>(b[i]) * bins / 256, 0, bins - 1);
        joint[static_cast<std::size_t>(ia) * bins + ib] += w;
        pa[static_cast<std::size_t>(ia)] += w;
        pb[static_cast<std::size_t>(ib)] += w;
    }
    return entropy_term(pa) + entropy_term(pb) - entropy_term(joint);
}

}  // namespace

TensorD to_grayscale(const TensorD& img) {
    if (img.c() == 1) return img;
    if (img.c() != 3) {
        throw std::invalid_argument("to_grayscale: channel axis is " + std::to_string(img.c()) +
                                    ", expected 1 or 3");
    }
    TensorD g({1, img.h(), img.w()});
    const std::size_t P = img.shape().plane();
    const double* r = img.plane(0);
    const double* gg = img.plane(1);
    const double* b = img.plane(2);
    for (std::size_t i = 0; i < P; ++i) g[i] = 0.299 * r[i] + 0.587 * gg[i] + 0.114 * b[i];
    return g;
}

TensorD quantize_8bit(const TensorD& gray) {
    TensorD q(gray.shape());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        q[i] = std::clamp(std::round(gray[i] * 255.0), 0.0, 255.0);
    }
    return q;
}

double pearson(const TensorD& a, const TensorD& b) {
    require_same(a, b, "pearson");
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

double q_mi(const TensorD& fused, const TensorD& src_a, const TensorD& src_b, int bins) {
    require_same(fused, src_a, "q_mi");
    require_same(fused, src_b, "q_mi");
    if (bins < 2 || bins > 256) throw std::invalid_argument("q_mi: bins must be in [2,256]");
    return mutual_information(fused, src_a, bins) + mutual_information(fused, src_b, bins);
}

double q_abf(const TensorD& fused, const TensorD& src_a, const TensorD& src_b) {
    require_same(fused, src_a, "q_abf");
    require_same(fused, src_b, "q_abf");
    TensorD fx, fy, ax, ay, bx, by;
    sobel_pair(fused, fx, fy);
    sobel_pair(src_a, ax, ay);
    sobel_pair(src_b, bx, by);

    const std::size_t n = fused.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double gf = std::hypot(fx[i], fy[i]);
        const double af = (fx[i] == 0.0 && fy[i] == 0.0) ? 0.0 : std::atan(fy[i] / fx[i]);
        auto edge_score = [&](double sx, double sy) {
            const double gs = std::hypot(sx, sy);
            double strength;
            if (gs == 0.0 && gf == 0.0) {
                strength = 1.0;  // nothing to preserve; weight below is 0 anyway
            } else if (gs > gf) {
                strength = gf / gs;
            } else {
                strength = gs == 0.0 ? 0.0 : gs / gf;
            }
            const double as = (sx == 0.0 && sy == 0.0) ? 0.0 : std::atan(sy / sx);
            const double rel_orient =
                std::clamp(1.0 - std::abs(as - af) / (3.14159265358979323846 / 2.0), 0.0, 1.0);
            const double qg = preservation(kKappaG, kSigmaG, strength);
            const double qa = preservation(kKappaA, kSigmaA, rel_orient);
            return std::make_pair(qg * qa, gs);
        };
        const auto [qa_score, wa] = edge_score(ax[i], ay[i]);
        const auto [qb_score, wb] = edge_score(bx[i], by[i]);
        num += qa_score * wa + qb_score * wb;
        den += wa + wb;
    }
    if (den == 0.0) return 0.0;
    return num / den;
}

double q_scd(const TensorD& fused, const TensorD& src_a, const TensorD& src_b) {
    require_same(fused, src_a, "q_scd");
    require_same(fused, src_b, "q_scd");
    TensorD fmb(fused.shape()), fma(fused.shape());
    for (std::size_t i = 0; i < fused.size(); ++i) {
        fmb[i] = fused[i] - src_b[i];
        fma[i] = fused[i] - src_a[i];
    }
    return pearson(fmb, src_a) + pearson(fma, src_b);
}

double q_sf(const TensorD& image) {
    const int H = image.h(), W = image.w();
    double rf = 0.0, cf = 0.0;
    if (W > 1) {
        for (int y = 0; y < H; ++y) {
            for (int x = 1; x < W; ++x) {
                const double d = image.at(0, y, x) - image.at(0, y, x - 1);
                rf += d * d;
            }
        }
        rf /= static_cast<double>(H) * (W - 1);
    }
    if (H > 1) {
        for (int y = 1; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const double d = image.at(0, y, x) - image.at(0, y - 1, x);
                cf += d * d;
            }
        }
        cf /= static_cast<double>(H - 1) * W;
    }
    return std::sqrt(rf + cf);
}

MetricRow evaluate_triple(const std::string& name, const TensorD& fused, const TensorD& ir,
                          const TensorD& vis_gt) {
    const TensorD f = quantize_8bit(to_grayscale(fused));
    const TensorD a = quantize_8bit(to_grayscale(ir));
    const TensorD b = quantize_8bit(to_grayscale(vis_gt));
    MetricRow row;
    row.name = name;
    row.mi = q_mi(f, a, b);
    row.abf = q_abf(f, a, b);
    row.scd = q_scd(f, a, b);
    row.sf = q_sf(f);
    return row;
}

void MetricReport::finalize() {
    mean = MetricRow{"mean", 0, 0, 0, 0};
    stddev = MetricRow{"stddev", 0, 0, 0, 0};
    if (rows.empty()) return;
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
        mean.mi += r.mi;
        mean.abf += r.abf;
        mean.scd += r.scd;
        mean.sf += r.sf;
    }
    mean.mi /= n;
    mean.abf /= n;
    mean.scd /= n;
    mean.sf /= n;
    for (const auto& r : rows) {
        stddev.mi += (r.mi - mean.mi) * (r.mi - mean.mi);
        stddev.abf += (r.abf - mean.abf) * (r.abf - mean.abf);
        stddev.scd += (r.scd - mean.scd) * (r.scd - mean.scd);
        stddev.sf += (r.sf - mean.sf) * (r.sf - mean.sf);
    }
    stddev.mi = std::sqrt(stddev.mi / n);
    stddev.abf = std::sqrt(stddev.abf / n);
    stddev.scd = std::sqrt(stddev.scd / n);
    stddev.sf = std::sqrt(stddev.sf / n);
}

std::string MetricReport::to_csv() const {
    std::ostringstream out;
    out.precision(9);
    // Columns the excluded perceptual metrics would occupy stay as n/a so the
    // schema lines up with full published tables.
    out << "name,q_mi,q_abf,q_scd,q_sf,q_vif,q_cv,q_pi,q_niqe\n";
    auto emit = [&out](const MetricRow& r) {
        out << r.name << ',' << r.mi << ',' << r.abf << ',' << r.scd << ',' << r.sf
            << ",n/a,n/a,n/a,n/a\n";
    };
    for (const auto& r : rows) emit(r);
    emit(mean);
    emit(stddev);
    return out.str();
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    auto row_json = [](const MetricRow& r) {
        nlohmann::json o;
        o["name"] = r.name;
        o["q_mi"] = r.mi;
        o["q_abf"] = r.abf;
        o["q_scd"] = r.scd;
        o["q_sf"] = r.sf;
        o["q_vif"] = nullptr;
        o["q_cv"] = nullptr;
        o["q_pi"] = nullptr;
        o["q_niqe"] = nullptr;
        return o;
    };
    j["images"] = nlohmann::json::array();
    for (const auto& r : rows) j["images"].push_back(row_json(r));
    j["mean"] = row_json(mean);
    j["stddev"] = row_json(stddev);
    return j.dump(2);
}

}  // namespace irvf
