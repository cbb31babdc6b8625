#include "zonocert/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace zonocert::nn {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

static void write_tensor(std::ostream& os, const char* tag, const Tensor& t) {
    os << tag << " " << t.rank();
    for (int d : t.shape()) os << " " << d;
    os << "\n";
    for (std::int64_t i = 0; i < t.size(); ++i) {
        if (i) os << " ";
        os << format_double(t[i]);
    }
    os << "\n";
}

void write_checkpoint(std::ostream& os, const LayeredNetwork& net, std::uint64_t seed) {
    os << "zonocert-checkpoint 1\n";
    os << "seed " << seed << "\n";
    os << "input " << net.input_shape().size();
    for (int d : net.input_shape()) os << " " << d;
    os << "\n";
    os << "layers " << net.layer_count() << "\n";
    for (int i = 0; i < net.layer_count(); ++i) {
        const Layer& l = net.layer(i);
        switch (l.kind) {
        case LayerKind::Relu:
            os << "layer " << i << " relu\n";
            break;
        case LayerKind::Dense:
            os << "layer " << i << " dense frozen " << (l.frozen ? 1 : 0) << "\n";
            write_tensor(os, "weight", l.weight);
            write_tensor(os, "bias", l.bias);
            break;
        case LayerKind::Conv:
            os << "layer " << i << " conv frozen " << (l.frozen ? 1 : 0) << " stride " << l.stride
               << "\n";
            write_tensor(os, "kernel", l.weight);
            write_tensor(os, "bias", l.bias);
            break;
        }
    }
    os << "end\n";
}

void write_checkpoint_file(const std::string& path, const LayeredNetwork& net, std::uint64_t seed) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open checkpoint for writing: " + path);
    write_checkpoint(os, net, seed);
    if (!os) throw FormatError("write failed: " + path);
}

namespace {

class TokenReader {
public:
    explicit TokenReader(std::istream& is) : is_(is) {}

    std::string next() {
        std::string tok;
        if (!(is_ >> tok)) throw FormatError("checkpoint truncated");
        return tok;
    }

    void expect(const std::string& want) {
        const std::string got = next();
        if (got != want) throw FormatError("checkpoint: expected '" + want + "', got '" + got + "'");
    }

    long long integer() {
        const std::string tok = next();
        try {
            std::size_t used = 0;
            const long long v = std::stoll(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw FormatError("checkpoint: bad integer '" + tok + "'");
        }
    }

    std::uint64_t unsigned_integer() {
        const std::string tok = next();
        try {
            std::size_t used = 0;
            const std::uint64_t v = std::stoull(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw FormatError("checkpoint: bad integer '" + tok + "'");
        }
    }

    double real() {
        const std::string tok = next();
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw FormatError("checkpoint: bad real '" + tok + "'");
        }
    }

private:
    std::istream& is_;
};

Tensor read_tensor(TokenReader& r, const char* tag) {
    r.expect(tag);
    const int rank = static_cast<int>(r.integer());
    if (rank < 1 || rank > 4) throw FormatError("checkpoint: bad tensor rank");
    std::vector<int> shape(static_cast<std::size_t>(rank));
    for (auto& d : shape) d = static_cast<int>(r.integer());
    const std::int64_t n = shape_product(shape);
    std::vector<double> data(static_cast<std::size_t>(n));
    for (auto& v : data) v = r.real();
    return Tensor(std::move(shape), std::move(data));
}

} // namespace

Checkpoint read_checkpoint(std::istream& is) {
    TokenReader r(is);
    r.expect("zonocert-checkpoint");
    r.expect("1");
    r.expect("seed");
    const std::uint64_t seed = r.unsigned_integer();
    r.expect("input");
    const int in_rank = static_cast<int>(r.integer());
    std::vector<int> input_shape(static_cast<std::size_t>(in_rank));
    for (auto& d : input_shape) d = static_cast<int>(r.integer());
    r.expect("layers");
    const int n_layers = static_cast<int>(r.integer());
    if (n_layers < 1 || n_layers > 1000) throw FormatError("checkpoint: bad layer count");
    std::vector<Layer> layers;
    layers.reserve(static_cast<std::size_t>(n_layers));
    for (int i = 0; i < n_layers; ++i) {
        r.expect("layer");
        const int idx = static_cast<int>(r.integer());
        if (idx != i) throw FormatError("checkpoint: layer index mismatch");
        const std::string kind = r.next();
        if (kind == "relu") {
            layers.push_back(Layer::relu());
        } else if (kind == "dense") {
            r.expect("frozen");
            const int frozen = static_cast<int>(r.integer());
            Tensor w = read_tensor(r, "weight");
            Tensor b = read_tensor(r, "bias");
            Layer l = Layer::dense(std::move(w), std::move(b));
            l.frozen = frozen != 0;
            layers.push_back(std::move(l));
        } else if (kind == "conv") {
            r.expect("frozen");
            const int frozen = static_cast<int>(r.integer());
            r.expect("stride");
            const int stride = static_cast<int>(r.integer());
            Tensor k = read_tensor(r, "kernel");
            Tensor b = read_tensor(r, "bias");
            Layer l = Layer::conv(std::move(k), stride, std::move(b));
            l.frozen = frozen != 0;
            layers.push_back(std::move(l));
        } else {
            throw FormatError("checkpoint: unknown layer kind '" + kind + "'");
        }
    }
    r.expect("end");
    Checkpoint ck;
    ck.net = LayeredNetwork(std::move(input_shape), std::move(layers));
    ck.seed = seed;
    return ck;
}

Checkpoint read_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open checkpoint: " + path);
    return read_checkpoint(is);
}

} // namespace zonocert::nn
