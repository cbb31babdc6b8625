#include "oracles.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace zonocert::testsupport {

std::vector<double> naive_forward(const nn::LayeredNetwork& net, const std::vector<double>& x) {
    std::vector<double> cur = x;
    for (int li = 0; li < net.layer_count(); ++li) {
        const nn::Layer& l = net.layer(li);
        if (l.kind == nn::LayerKind::Relu) {
            for (auto& v : cur) v = v > 0 ? v : 0;
            continue;
        }
        if (l.kind == nn::LayerKind::Dense) {
            const int out_n = l.weight.shape()[0];
            const int in_n = l.weight.shape()[1];
            std::vector<double> next(static_cast<std::size_t>(out_n));
            for (int r = 0; r < out_n; ++r) {
                double acc = l.bias[r];
                for (int c = 0; c < in_n; ++c) {
                    acc += l.weight[static_cast<std::int64_t>(r) * in_n + c] *
                           cur[static_cast<std::size_t>(c)];
                }
                next[static_cast<std::size_t>(r)] = acc;
            }
            cur = std::move(next);
            continue;
        }
        // conv
        const int ic = l.in_shape[0], ih = l.in_shape[1], iw = l.in_shape[2];
        const int oc = l.out_shape[0], oh = l.out_shape[1], ow = l.out_shape[2];
        const int kh = l.weight.shape()[2], kw = l.weight.shape()[3];
        std::vector<double> next(static_cast<std::size_t>(oc) * oh * ow);
        for (int o = 0; o < oc; ++o) {
            for (int y = 0; y < oh; ++y) {
                for (int xo = 0; xo < ow; ++xo) {
                    double acc = l.bias[o];
                    for (int c = 0; c < ic; ++c) {
                        for (int ky = 0; ky < kh; ++ky) {
                            for (int kx = 0; kx < kw; ++kx) {
                                acc += l.weight[(((static_cast<std::int64_t>(o) * ic + c) * kh + ky) * kw) + kx] *
                                       cur[static_cast<std::size_t>((c * ih + y * l.stride + ky) * iw +
                                                                    xo * l.stride + kx)];
                            }
                        }
                    }
                    next[static_cast<std::size_t>((o * oh + y) * ow + xo)] = acc;
                }
            }
        }
        cur = std::move(next);
    }
    return cur;
}

std::vector<double> softmax_ld(const std::vector<double>& z) {
    long double mx = z[0];
    for (double v : z) mx = std::max<long double>(mx, v);
    long double sum = 0;
    std::vector<long double> e(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        e[i] = std::exp(static_cast<long double>(z[i]) - mx);
        sum += e[i];
    }
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = static_cast<double>(e[i] / sum);
    return out;
}

double cross_entropy_ld(const std::vector<double>& p, int y) {
    return static_cast<double>(-std::log(static_cast<long double>(p[static_cast<std::size_t>(y)]) +
                                         1e-12L));
}

double kl_ld(const std::vector<double>& p, const std::vector<double>& q) {
    long double acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += static_cast<long double>(p[i]) *
               (std::log(static_cast<long double>(p[i]) + 1e-12L) -
                std::log(static_cast<long double>(q[i]) + 1e-12L));
    }
    return static_cast<double>(acc);
}

std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> theta, double h) {
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        const double fp = f(theta);
        theta[i] = keep - h;
        const double fm = f(theta);
        theta[i] = keep;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

EnumBounds enumerate_bounds(const std::vector<double>& center,
                            const std::vector<std::vector<double>>& columns) {
    const std::size_t m = columns.size();
    if (m > 24) throw std::runtime_error("enumerate_bounds: too many generators");
    EnumBounds out;
    out.lower = center;
    out.upper = center;
    const std::size_t total = static_cast<std::size_t>(1) << m;
    for (std::size_t mask = 0; mask < total; ++mask) {
        std::vector<double> v = center;
        for (std::size_t j = 0; j < m; ++j) {
            const double s = (mask >> j) & 1 ? 1.0 : -1.0;
            for (std::size_t i = 0; i < v.size(); ++i) v[i] += s * columns[j][i];
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.lower[i] = std::min(out.lower[i], v[i]);
            out.upper[i] = std::max(out.upper[i], v[i]);
        }
    }
    return out;
}

Poly2 rect_poly(double x0, double x1, double y0, double y1) {
    Poly2 p;
    p.pts = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    return p;
}

Poly2 clip_halfplane(const Poly2& poly, double a, double b, double c) {
    Poly2 out;
    const std::size_t n = poly.pts.size();
    if (n == 0) return out;
    auto side = [&](const std::array<double, 2>& p) { return a * p[0] + b * p[1] + c; };
    for (std::size_t i = 0; i < n; ++i) {
        const auto& cur = poly.pts[i];
        const auto& nxt = poly.pts[(i + 1) % n];
        const double sc = side(cur), sn = side(nxt);
        if (sc >= 0) out.pts.push_back(cur);
        if ((sc > 0 && sn < 0) || (sc < 0 && sn > 0)) {
            const double t = sc / (sc - sn);
            out.pts.push_back({cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])});
        }
    }
    return out;
}

namespace {

struct AffineMap2 {
    // value = c + j * x, x in R^2
    std::vector<double> c;
    std::vector<std::array<double, 2>> j;
};

AffineMap2 apply_dense(const nn::Layer& l, const AffineMap2& in) {
    const int out_n = l.weight.shape()[0];
    const int in_n = l.weight.shape()[1];
    AffineMap2 out;
    out.c.assign(static_cast<std::size_t>(out_n), 0.0);
    out.j.assign(static_cast<std::size_t>(out_n), {0.0, 0.0});
    for (int r = 0; r < out_n; ++r) {
        double acc = l.bias[r];
        std::array<double, 2> jrow{0.0, 0.0};
        for (int cidx = 0; cidx < in_n; ++cidx) {
            const double w = l.weight[static_cast<std::int64_t>(r) * in_n + cidx];
            acc += w * in.c[static_cast<std::size_t>(cidx)];
            jrow[0] += w * in.j[static_cast<std::size_t>(cidx)][0];
            jrow[1] += w * in.j[static_cast<std::size_t>(cidx)][1];
        }
        out.c[static_cast<std::size_t>(r)] = acc;
        out.j[static_cast<std::size_t>(r)] = jrow;
    }
    return out;
}

} // namespace

ExactVerdict enumerate_verify_2d(const nn::LayeredNetwork& net, const std::array<double, 2>& x,
                                 int y, double eps) {
    // Gather ReLU widths.
    std::vector<int> relu_layers, relu_width;
    for (int i = 0; i < net.layer_count(); ++i) {
        if (net.layer(i).kind == nn::LayerKind::Relu) {
            relu_layers.push_back(i);
            relu_width.push_back(static_cast<int>(nn::shape_product(net.layer(i).in_shape)));
        }
    }
    int total = 0;
    for (int w : relu_width) total += w;
    if (total > 20) throw std::runtime_error("enumerate_verify_2d: too many ReLUs");

    const double lx = std::max(0.0, x[0] - eps), ux = std::min(1.0, x[0] + eps);
    const double ly = std::max(0.0, x[1] - eps), uy = std::min(1.0, x[1] + eps);

    ExactVerdict verdict;
    verdict.max_margin = -std::numeric_limits<double>::infinity();

    const std::size_t patterns = static_cast<std::size_t>(1) << total;
    for (std::size_t pattern = 0; pattern < patterns; ++pattern) {
        Poly2 region = rect_poly(lx, ux, ly, uy);
        AffineMap2 cur;
        cur.c = {0.0, 0.0};
        cur.j = {{1.0, 0.0}, {0.0, 1.0}};
        int bit = 0;
        bool alive = true;
        for (int li = 0; li < net.layer_count() && alive; ++li) {
            const nn::Layer& l = net.layer(li);
            if (l.kind == nn::LayerKind::Dense) {
                cur = apply_dense(l, cur);
                continue;
            }
            if (l.kind != nn::LayerKind::Relu) throw std::runtime_error("oracle: dense/relu only");
            for (std::size_t i = 0; i < cur.c.size(); ++i, ++bit) {
                const bool active = (pattern >> bit) & 1;
                const double sgn = active ? 1.0 : -1.0;
                region = clip_halfplane(region, sgn * cur.j[i][0], sgn * cur.j[i][1],
                                        sgn * cur.c[i]);
                if (region.empty()) {
                    alive = false;
                    break;
                }
                if (!active) {
                    cur.c[i] = 0.0;
                    cur.j[i] = {0.0, 0.0};
                }
            }
        }
        if (!alive || region.empty()) continue;
        const int classes = static_cast<int>(cur.c.size());
        for (int k = 0; k < classes; ++k) {
            if (k == y) continue;
            const double dc = cur.c[static_cast<std::size_t>(k)] - cur.c[static_cast<std::size_t>(y)];
            const std::array<double, 2> dj{
                cur.j[static_cast<std::size_t>(k)][0] - cur.j[static_cast<std::size_t>(y)][0],
                cur.j[static_cast<std::size_t>(k)][1] - cur.j[static_cast<std::size_t>(y)][1]};
            for (const auto& v : region.pts) {
                const double margin = dc + dj[0] * v[0] + dj[1] * v[1];
                if (margin > verdict.max_margin) {
                    verdict.max_margin = margin;
                    verdict.argmax = v;
                }
            }
        }
    }
    verdict.robust = verdict.max_margin < 0.0;
    return verdict;
}

RawIdx read_idx_reference(const std::string& images_path, const std::string& labels_path) {
    auto slurp = [](const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw std::runtime_error("cannot open " + path);
        return std::vector<unsigned char>((std::istreambuf_iterator<char>(is)),
                                          std::istreambuf_iterator<char>());
    };
    auto be32 = [](const std::vector<unsigned char>& b, std::size_t off) {
        return (static_cast<std::uint32_t>(b[off]) << 24) |
               (static_cast<std::uint32_t>(b[off + 1]) << 16) |
               (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
    };
    const auto ib = slurp(images_path);
    const auto lb = slurp(labels_path);
    if (be32(ib, 0) != 0x803u || be32(lb, 0) != 0x801u) throw std::runtime_error("bad idx magic");
    RawIdx out;
    out.count = static_cast<int>(be32(ib, 4));
    out.rows = static_cast<int>(be32(ib, 8));
    out.cols = static_cast<int>(be32(ib, 12));
    if (static_cast<int>(be32(lb, 4)) != out.count) throw std::runtime_error("count mismatch");
    const std::size_t n_pixels = static_cast<std::size_t>(out.count) * out.rows * out.cols;
    if (ib.size() != 16 + n_pixels || lb.size() != 8 + static_cast<std::size_t>(out.count)) {
        throw std::runtime_error("truncated idx data");
    }
    out.pixels.assign(ib.begin() + 16, ib.end());
    out.labels.assign(lb.begin() + 8, lb.end());
    return out;
}

} // namespace zonocert::testsupport
