#include "meshfuse/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "json.hpp"

#include "meshfuse/errors.hpp"

namespace meshfuse {
namespace {

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// y = W x + b with W shaped [out, in], row-major.
Vec linear(const Tensor& w, const Tensor& b, const Vec& x) {
    const std::size_t out_dim = w.shape[0];
    const std::size_t in_dim = w.shape[1];
    if (x.size() != in_dim) {
        throw DimensionError("linear: input width " + std::to_string(x.size()) +
                             " != " + std::to_string(in_dim));
    }
    Vec y(out_dim, 0.0);
    for (std::size_t r = 0; r < out_dim; ++r) {
        const double* row = w.data.data() + r * in_dim;
        double s = b.data[r];
        for (std::size_t c = 0; c < in_dim; ++c) s += row[c] * x[c];
        y[r] = s;
    }
    return y;
}

Vec gelu_all(Vec v) {
    for (double& x : v) x = gelu(x);
    return v;
}

Vec layer_norm(const Vec& x, const Tensor& gamma, const Tensor& beta) {
    constexpr double kEps = 1e-5;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(var + kEps);
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = (x[i] - mean) * inv * gamma.data[i] + beta.data[i];
    }
    return y;
}

std::vector<double> softmax(std::vector<double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : logits) v /= sum;
    return logits;
}

struct AttnWeights {
    const Tensor *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
};

AttnWeights attn_weights(const ModelWeights& m, const std::string& prefix) {
    return {&m.at(prefix + ".q.weight"),   &m.at(prefix + ".q.bias"),
            &m.at(prefix + ".k.weight"),   &m.at(prefix + ".k.bias"),
            &m.at(prefix + ".v.weight"),   &m.at(prefix + ".v.bias"),
            &m.at(prefix + ".out.weight"), &m.at(prefix + ".out.bias")};
}

// Scaled dot-product multi-head attention; queries attend over keys==values.
std::vector<Vec> multi_head_attention(const AttnWeights& w,
                                      const std::vector<Vec>& queries,
                                      const std::vector<Vec>& keys,
                                      std::size_t heads) {
    const std::size_t d = w.wq->shape[0];
    const std::size_t head_dim = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    std::vector<Vec> q(queries.size()), k(keys.size()), v(keys.size());
    for (std::size_t i = 0; i < queries.size(); ++i) q[i] = linear(*w.wq, *w.bq, queries[i]);
    for (std::size_t i = 0; i < keys.size(); ++i) {
        k[i] = linear(*w.wk, *w.bk, keys[i]);
        v[i] = linear(*w.wv, *w.bv, keys[i]);
    }

    std::vector<Vec> out(queries.size());
    std::vector<double> scores(keys.size());
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        Vec concat(d, 0.0);
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * head_dim;
            for (std::size_t ki = 0; ki < keys.size(); ++ki) {
                double s = 0.0;
                for (std::size_t c = 0; c < head_dim; ++c) {
                    s += q[qi][off + c] * k[ki][off + c];
                }
                scores[ki] = s * scale;
            }
            const std::vector<double> attn = softmax(scores);
            for (std::size_t ki = 0; ki < keys.size(); ++ki) {
                for (std::size_t c = 0; c < head_dim; ++c) {
                    concat[off + c] += attn[ki] * v[ki][off + c];
                }
            }
        }
        out[qi] = linear(*w.wo, *w.bo, concat);
    }
    return out;
}

void check_finite(const Tensor& t, const std::string& name) {
    for (double v : t.data) {
        if (!std::isfinite(v)) {
            throw ConfigError("non-finite value in tensor " + name);
        }
    }
}

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    return n;
}

}  // namespace

NeuralConfig NeuralConfig::tiny() {
    NeuralConfig c;
    c.d = 4;
    c.sent_dim = 8;
    c.backbone_hidden = 8;
    c.backbone_out = 8;
    c.heads = 1;
    c.ffn_hidden = 16;
    c.gate_hidden1 = 16;
    c.gate_hidden2 = 8;
    c.transform_hidden = 4;
    c.drift_hidden = 4;
    c.head_hidden = 4;
    return c;
}

std::vector<TensorSpec> model_tensor_specs(const NeuralConfig& c) {
    std::vector<TensorSpec> specs;
    const auto mlp = [&](const std::string& prefix, std::size_t in, std::size_t hidden,
                         std::size_t out) {
        specs.push_back({prefix + ".l1.weight", {hidden, in}});
        specs.push_back({prefix + ".l1.bias", {hidden}});
        specs.push_back({prefix + ".l2.weight", {out, hidden}});
        specs.push_back({prefix + ".l2.bias", {out}});
    };
    const auto attn = [&](const std::string& prefix) {
        for (const char* part : {"q", "k", "v", "out"}) {
            specs.push_back({prefix + "." + part + ".weight", {c.d, c.d}});
            specs.push_back({prefix + "." + part + ".bias", {c.d}});
        }
    };

    mlp("backbone", c.sent_dim, c.backbone_hidden, c.backbone_out);
    for (FieldId f : kAllFields) {
        const std::string name(field_name(f));
        specs.push_back({"head." + name + ".weight", {c.d, c.backbone_out}});
        specs.push_back({"head." + name + ".bias", {c.d}});
    }
    attn("crossfield.attn");
    specs.push_back({"crossfield.norm1.gamma", {c.d}});
    specs.push_back({"crossfield.norm1.beta", {c.d}});
    mlp("crossfield.ffn", c.d, c.ffn_hidden, c.d);
    specs.push_back({"crossfield.norm2.gamma", {c.d}});
    specs.push_back({"crossfield.norm2.beta", {c.d}});
    attn("anchor.attn");
    specs.push_back({"gate.l1.weight", {c.gate_hidden1, c.gate_input()}});
    specs.push_back({"gate.l1.bias", {c.gate_hidden1}});
    specs.push_back({"gate.l2.weight", {c.gate_hidden2, c.gate_hidden1}});
    specs.push_back({"gate.l2.bias", {c.gate_hidden2}});
    specs.push_back({"gate.l3.weight", {kFieldCount, c.gate_hidden2}});
    specs.push_back({"gate.l3.bias", {kFieldCount}});
    for (FieldId f : kAllFields) {
        mlp("transform." + std::string(field_name(f)), 2 * c.d, c.transform_hidden, c.d);
    }
    for (FieldId f : kAllFields) {
        mlp("drift." + std::string(field_name(f)), 3 * c.d, c.drift_hidden, 1);
    }
    mlp("drift.aggregate", kFieldCount + 2, c.head_hidden, 1);
    mlp("decision", kFieldCount + 2, c.head_hidden, 3);
    return specs;
}

ModelWeights::ModelWeights(NeuralConfig config, std::map<std::string, Tensor> tensors)
    : config_(config), tensors_(std::move(tensors)) {}

const Tensor& ModelWeights::at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ConfigError("missing tensor " + name);
    return it->second;
}

Tensor& ModelWeights::at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ConfigError("missing tensor " + name);
    return it->second;
}

std::size_t ModelWeights::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors_) n += t.size();
    return n;
}

void ModelWeights::validate() const {
    const std::vector<TensorSpec> specs = model_tensor_specs(config_);
    if (specs.size() != tensors_.size()) {
        throw ConfigError("tensor count mismatch: expected " +
                          std::to_string(specs.size()) + ", got " +
                          std::to_string(tensors_.size()));
    }
    for (const TensorSpec& spec : specs) {
        const Tensor& t = at(spec.name);
        if (t.shape != spec.shape) {
            throw ConfigError("shape mismatch for tensor " + spec.name);
        }
        if (t.data.size() != shape_size(t.shape)) {
            throw ConfigError("data size mismatch for tensor " + spec.name);
        }
        check_finite(t, spec.name);
    }
}

ModelWeights init_weights(const NeuralConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    // Portable uniform in [0,1): mt19937_64 output is standardized, the
    // distribution adapters are not.
    const auto uniform01 = [&rng] {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    };

    std::map<std::string, Tensor> tensors;
    for (const TensorSpec& spec : model_tensor_specs(config)) {
        Tensor t;
        t.shape = spec.shape;
        t.data.resize(shape_size(spec.shape));
        const bool is_weight = spec.shape.size() == 2;
        const bool is_gamma = spec.name.ends_with(".gamma");
        if (is_weight) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(spec.shape[1]));
            for (double& v : t.data) v = (uniform01() * 2.0 - 1.0) * bound;
        } else if (is_gamma) {
            std::fill(t.data.begin(), t.data.end(), 1.0);
        } else {
            std::fill(t.data.begin(), t.data.end(), 0.0);
        }
        tensors.emplace(spec.name, std::move(t));
    }
    ModelWeights w(config, std::move(tensors));
    w.validate();
    return w;
}

namespace {

NeuralConfig config_from_json(const nlohmann::json& j) {
    NeuralConfig c;
    c.d = j.value("d", c.d);
    c.sent_dim = j.value("sent_dim", c.sent_dim);
    c.backbone_hidden = j.value("backbone_hidden", c.backbone_hidden);
    c.backbone_out = j.value("backbone_out", c.backbone_out);
    c.heads = j.value("heads", c.heads);
    c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
    c.gate_hidden1 = j.value("gate_hidden1", c.gate_hidden1);
    c.gate_hidden2 = j.value("gate_hidden2", c.gate_hidden2);
    c.transform_hidden = j.value("transform_hidden", c.transform_hidden);
    c.drift_hidden = j.value("drift_hidden", c.drift_hidden);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    c.margin = j.value("margin", c.margin);
    c.lambda_drift = j.value("lambda_drift", c.lambda_drift);
    c.lambda_gate = j.value("lambda_gate", c.lambda_gate);
    c.lambda_coupling = j.value("lambda_coupling", c.lambda_coupling);
    if (j.contains("class_weights")) {
        auto cw = j.at("class_weights").get<std::vector<double>>();
        if (cw.size() == 3) c.class_weights = {cw[0], cw[1], cw[2]};
    }
    return c;
}

nlohmann::json config_to_json(const NeuralConfig& c) {
    return nlohmann::json{{"d", c.d},
                          {"sent_dim", c.sent_dim},
                          {"backbone_hidden", c.backbone_hidden},
                          {"backbone_out", c.backbone_out},
                          {"heads", c.heads},
                          {"ffn_hidden", c.ffn_hidden},
                          {"gate_hidden1", c.gate_hidden1},
                          {"gate_hidden2", c.gate_hidden2},
                          {"transform_hidden", c.transform_hidden},
                          {"drift_hidden", c.drift_hidden},
                          {"head_hidden", c.head_hidden},
                          {"margin", c.margin},
                          {"lambda_drift", c.lambda_drift},
                          {"lambda_gate", c.lambda_gate},
                          {"lambda_coupling", c.lambda_coupling},
                          {"class_weights", c.class_weights}};
}

std::string dirname_of(const std::string& path) {
    const auto slash = path.find_last_of('/');
    return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

}  // namespace

ModelWeights load_weights(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot open weight manifest: " + manifest_path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("invalid weight manifest JSON");

    const NeuralConfig config = config_from_json(j.value("config", nlohmann::json::object()));
    const std::string blob_path = dirname_of(manifest_path) + "/" +
                                  j.at("blob").get<std::string>();
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) throw ConfigError("cannot open weight blob: " + blob_path);
    blob.seekg(0, std::ios::end);
    const std::size_t blob_floats = static_cast<std::size_t>(blob.tellg()) / sizeof(float);
    blob.seekg(0);
    std::vector<float> raw(blob_floats);
    blob.read(reinterpret_cast<char*>(raw.data()),
              static_cast<std::streamsize>(blob_floats * sizeof(float)));

    std::map<std::string, Tensor> tensors;
    for (const auto& je : j.at("tensors")) {
        Tensor t;
        const std::string name = je.at("name").get<std::string>();
        t.shape = je.at("shape").get<std::vector<std::size_t>>();
        const std::size_t offset = je.at("offset").get<std::size_t>();
        const std::size_t count = shape_size(t.shape);
        if (offset + count > raw.size()) {
            throw ConfigError("blob too small for tensor " + name);
        }
        t.data.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            t.data[i] = static_cast<double>(raw[offset + i]);
        }
        if (!tensors.emplace(name, std::move(t)).second) {
            throw ConfigError("duplicate tensor " + name);
        }
    }
    ModelWeights w(config, std::move(tensors));
    w.validate();
    return w;
}

void save_weights(const ModelWeights& weights, const std::string& manifest_path,
                  const std::string& blob_filename) {
    const std::string blob_path = dirname_of(manifest_path) + "/" + blob_filename;
    std::ofstream blob(blob_path, std::ios::binary);
    if (!blob) throw ConfigError("cannot write weight blob: " + blob_path);

    nlohmann::json manifest;
    manifest["format"] = "meshfuse-weights-v1";
    manifest["dtype"] = "float32-le";
    manifest["activation"] = "gelu";
    manifest["blob"] = blob_filename;
    manifest["config"] = config_to_json(weights.config());
    nlohmann::json jt = nlohmann::json::array();
    std::size_t offset = 0;
    for (const TensorSpec& spec : model_tensor_specs(weights.config())) {
        const Tensor& t = weights.at(spec.name);
        jt.push_back({{"name", spec.name}, {"shape", t.shape}, {"offset", offset}});
        std::vector<float> raw(t.data.size());
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            raw[i] = static_cast<float>(t.data[i]);
        }
        blob.write(reinterpret_cast<const char*>(raw.data()),
                   static_cast<std::streamsize>(raw.size() * sizeof(float)));
        offset += t.data.size();
    }
    manifest["tensors"] = std::move(jt);

    std::ofstream out(manifest_path);
    if (!out) throw ConfigError("cannot write weight manifest: " + manifest_path);
    out << manifest.dump(2) << "\n";
}

NeuralOutput forward(const ModelWeights& m,
                     const std::vector<Vec>& incoming_field_sentvecs,
                     const std::vector<FieldMap<Vec>>& anchor_field_vecs,
                     double tau_fresh, double confidence) {
    const NeuralConfig& c = m.config();
    if (incoming_field_sentvecs.size() != kFieldCount) {
        throw DimensionError("forward: expected 7 field sentence vectors");
    }
    if (anchor_field_vecs.empty()) {
        throw DimensionError("forward: at least one anchor required");
    }
    for (const Vec& v : incoming_field_sentvecs) {
        if (v.size() != c.sent_dim) {
            throw DimensionError("forward: sentence vector width != sent_dim");
        }
    }
    for (const auto& anchor : anchor_field_vecs) {
        for (const Vec& v : anchor) {
            if (v.size() != c.d) {
                throw DimensionError("forward: anchor field vector width != d");
            }
        }
    }

    // ENCODE: shared backbone, per-field head, unit norm.
    std::vector<Vec> encoded(kFieldCount);
    for (FieldId f : kAllFields) {
        const std::size_t i = field_index(f);
        Vec h = gelu_all(linear(m.at("backbone.l1.weight"), m.at("backbone.l1.bias"),
                                incoming_field_sentvecs[i]));
        h = linear(m.at("backbone.l2.weight"), m.at("backbone.l2.bias"), h);
        const std::string name(field_name(f));
        h = linear(m.at("head." + name + ".weight"), m.at("head." + name + ".bias"), h);
        encoded[i] = normalized(std::move(h));
    }

    // CONTEXTUALISE: the 7 fields attend to each other, residual + LayerNorm,
    // position-wise FFN, then renormalize so downstream consumers see unit
    // field vectors.
    const AttnWeights cf = attn_weights(m, "crossfield.attn");
    const std::vector<Vec> attended = multi_head_attention(cf, encoded, encoded, c.heads);
    std::vector<Vec> v_new(kFieldCount);
    for (std::size_t i = 0; i < kFieldCount; ++i) {
        Vec sum(c.d);
        for (std::size_t k = 0; k < c.d; ++k) sum[k] = encoded[i][k] + attended[i][k];
        Vec y1 = layer_norm(sum, m.at("crossfield.norm1.gamma"), m.at("crossfield.norm1.beta"));
        Vec ffn = gelu_all(linear(m.at("crossfield.ffn.l1.weight"),
                                  m.at("crossfield.ffn.l1.bias"), y1));
        ffn = linear(m.at("crossfield.ffn.l2.weight"), m.at("crossfield.ffn.l2.bias"), ffn);
        for (std::size_t k = 0; k < c.d; ++k) ffn[k] += y1[k];
        Vec y2 = layer_norm(ffn, m.at("crossfield.norm2.gamma"), m.at("crossfield.norm2.beta"));
        v_new[i] = normalized(std::move(y2));
    }

    // EVALUATE: per-field anchor attention (weights shared across fields;
    // the query vector carries the field identity).
    const AttnWeights an = attn_weights(m, "anchor.attn");
    std::vector<Vec> anchor_ctx(kFieldCount);
    std::vector<Vec> keys(anchor_field_vecs.size());
    for (std::size_t i = 0; i < kFieldCount; ++i) {
        for (std::size_t j = 0; j < anchor_field_vecs.size(); ++j) {
            keys[j] = anchor_field_vecs[j][i];
        }
        anchor_ctx[i] = multi_head_attention(an, {v_new[i]}, keys, c.heads)[0];
    }

    // Fusion gate over [flat(v_new); flat(anchor_ctx); tau_fresh; confidence].
    Vec gate_in;
    gate_in.reserve(c.gate_input());
    for (std::size_t i = 0; i < kFieldCount; ++i) {
        gate_in.insert(gate_in.end(), v_new[i].begin(), v_new[i].end());
    }
    for (std::size_t i = 0; i < kFieldCount; ++i) {
        gate_in.insert(gate_in.end(), anchor_ctx[i].begin(), anchor_ctx[i].end());
    }
    gate_in.push_back(tau_fresh);
    gate_in.push_back(confidence);
    Vec g = gelu_all(linear(m.at("gate.l1.weight"), m.at("gate.l1.bias"), gate_in));
    g = gelu_all(linear(m.at("gate.l2.weight"), m.at("gate.l2.bias"), g));
    g = linear(m.at("gate.l3.weight"), m.at("gate.l3.bias"), g);

    NeuralOutput out;
    for (std::size_t i = 0; i < kFieldCount; ++i) out.gates[i] = stable_sigmoid(g[i]);

    // SYNTHESISE: per-field transform and gated fusion.
    for (FieldId f : kAllFields) {
        const std::size_t i = field_index(f);
        const std::string prefix = "transform." + std::string(field_name(f));
        Vec zin;
        zin.reserve(2 * c.d);
        zin.insert(zin.end(), v_new[i].begin(), v_new[i].end());
        zin.insert(zin.end(), anchor_ctx[i].begin(), anchor_ctx[i].end());
        Vec z = gelu_all(linear(m.at(prefix + ".l1.weight"), m.at(prefix + ".l1.bias"), zin));
        z = linear(m.at(prefix + ".l2.weight"), m.at(prefix + ".l2.bias"), z);
        Vec fused(c.d);
        for (std::size_t k = 0; k < c.d; ++k) {
            fused[k] = out.gates[i] * v_new[i][k] + (1.0 - out.gates[i]) * z[k];
        }
        out.fused[i] = normalized(std::move(fused));
    }

    // Per-field drift prediction from [v_new; fused; anchor_ctx].
    for (FieldId f : kAllFields) {
        const std::size_t i = field_index(f);
        const std::string prefix = "drift." + std::string(field_name(f));
        Vec din;
        din.reserve(3 * c.d);
        din.insert(din.end(), v_new[i].begin(), v_new[i].end());
        din.insert(din.end(), out.fused[i].begin(), out.fused[i].end());
        din.insert(din.end(), anchor_ctx[i].begin(), anchor_ctx[i].end());
        Vec h = gelu_all(linear(m.at(prefix + ".l1.weight"), m.at(prefix + ".l1.bias"), din));
        h = linear(m.at(prefix + ".l2.weight"), m.at(prefix + ".l2.bias"), h);
        out.field_drift[i] = stable_sigmoid(h[0]);
    }

    Vec head_in;
    head_in.reserve(kFieldCount + 2);
    head_in.insert(head_in.end(), out.field_drift.begin(), out.field_drift.end());
    head_in.push_back(tau_fresh);
    head_in.push_back(confidence);

    Vec agg = gelu_all(linear(m.at("drift.aggregate.l1.weight"),
                              m.at("drift.aggregate.l1.bias"), head_in));
    agg = linear(m.at("drift.aggregate.l2.weight"), m.at("drift.aggregate.l2.bias"), agg);
    out.total_drift = stable_sigmoid(agg[0]);

    Vec dec = gelu_all(linear(m.at("decision.l1.weight"), m.at("decision.l1.bias"), head_in));
    dec = linear(m.at("decision.l2.weight"), m.at("decision.l2.bias"), dec);
    const std::vector<double> probs = softmax({dec[0], dec[1], dec[2]});
    out.probs = {probs[0], probs[1], probs[2]};
    return out;
}

LossBreakdown compute_loss(const NeuralOutput& output, int target_class,
                           const std::array<double, kFieldCount>& target_field_drifts,
                           const NeuralConfig& config) {
    if (target_class < 0 || target_class > 2) {
        throw ConfigError("compute_loss: target_class must be 0, 1, or 2");
    }
    LossBreakdown loss;

    constexpr double kLogFloor = 1e-300;
    loss.decision_ce = -config.class_weights[target_class] *
                       std::log(std::max(output.probs[target_class], kLogFloor));

    double mse = 0.0;
    double target_mean = 0.0;
    for (std::size_t i = 0; i < kFieldCount; ++i) {
        const double e = output.field_drift[i] - target_field_drifts[i];
        mse += e * e;
        target_mean += target_field_drifts[i];
    }
    target_mean /= static_cast<double>(kFieldCount);
    const double agg_err = output.total_drift - target_mean;
    mse += agg_err * agg_err;
    loss.drift_mse = mse / static_cast<double>(kFieldCount + 1);

    const bool rejected = target_class == 2;
    if (rejected) {
        double mean_gate = 0.0;
        for (double g : output.gates) mean_gate += g;
        loss.gate_dir = mean_gate / static_cast<double>(kFieldCount);
    } else {
        double mean_other = 0.0;
        for (FieldId f : kAllFields) {
            if (f != FieldId::mood) mean_other += output.gates[field_index(f)];
        }
        mean_other /= static_cast<double>(kFieldCount - 1);
        loss.coupling = std::max(
            mean_other - output.gates[field_index(FieldId::mood)] + config.margin, 0.0);
    }

    loss.total = loss.decision_ce + config.lambda_drift * loss.drift_mse +
                 config.lambda_gate * loss.gate_dir +
                 config.lambda_coupling * loss.coupling;
    return loss;
}

}  // namespace meshfuse
