// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles/scalar_oracles.hpp"
#include "qgvt/error.hpp"
#include "qgvt/flops.hpp"
#include "qgvt/pipeline.hpp"
#include "test_util.hpp"

namespace qgvt {
namespace {

const std::vector<std::size_t> kDefaultLayers = {12, 14, 16, 18, 20, 22};
const std::vector<std::size_t> kDefaultKeeps = {492, 408, 324, 240, 156, 72};

class Criterion {
public:
    void expect(bool ok, const std::string& what) {
        ++m_checks;
        if (!ok && m_failures.size() < 8) m_failures.push_back(what);
        m_failed |= !ok;
    }
    void note(const std::string& text) { m_notes.push_back(text); }
    bool failed() const { return m_failed; }
    std::size_t checks() const { return m_checks; }
    const std::vector<std::string>& failures() const { return m_failures; }
    std::string notes() const {
        std::string s;
        for (const auto& n : m_notes) s += (s.empty() ? "" : "; ") + n;
        return s;
    }

private:
    bool m_failed = false;
    std::size_t m_checks = 0;
    std::vector<std::string> m_failures;
    std::vector<std::string> m_notes;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

CompressionSchedule schedule_to(std::size_t m) {
    if (m >= 576) return CompressionSchedule(576, {});
    return build_schedule(576, m, kDefaultLayers);
}

struct Model {
    EncoderConfig config;
    TensorArchive archive;
    std::unique_ptr<EncoderWeights> weights;

    Model(EncoderConfig cfg, TensorArchive a) : config(cfg), archive(std::move(a)) {
        weights = std::make_unique<EncoderWeights>(archive, config);
    }
    Model(const std::string& preset, std::uint64_t seed)
        : Model(EncoderConfig::preset(preset), gen_synthetic(seed, EncoderConfig::preset(preset), preset)) {}
};

std::vector<GuidanceVector> queries(const Model& m, const CompressionSchedule& s, const std::string& question) {
    return stage_queries(toy_text_embed(question, m.config.text_dim, 0), s, m.archive, m.config);
}

// Encoder FLOPs ratio for seven compression placements.
void ac1(Criterion& c) {
    struct Row {
        const char* name;
        std::vector<std::size_t> layers;
        double expected;
    };
    const std::vector<Row> rows = {
        {"A1", {1, 3, 5, 7, 9, 11}, 36.87}, {"A2", {12, 13, 14, 15, 16, 17}, 68.46},
        {"A3", {17, 18, 19, 20, 21, 22}, 86.88}, {"A4", {12}, 59.47},
        {"A5", {16}, 74.21}, {"A6", {20}, 88.95},
        {"A7", kDefaultLayers, 77.36},
    };
    const auto cfg = EncoderConfig::preset("vit-l-14");
    const auto t0 = std::chrono::steady_clock::now();
    double worst_expected = 0, worst_oracle = 0;
    std::string values;
    for (const auto& r : rows) {
        const auto s = build_schedule(576, 72, r.layers);
        std::map<std::size_t, std::size_t> stages;
        for (const auto& st : s.stages()) stages[st.layer] = st.keep;
        const double got = encoder_ratio(s, cfg, false).ratio * 100;
        const double ref = static_cast<double>(oracle::flops_ratio(24, 576, 1024, 4096, stages) * 100);
        worst_expected = std::max(worst_expected, std::abs(got - r.expected));
        worst_oracle = std::max(worst_oracle, std::abs(got - ref));
        c.expect(std::abs(got - r.expected) <= 0.06, std::string(r.name) + " " + fmt("%.4f", got) + " vs expected " +
                                                            fmt("%.2f", r.expected));
        c.expect(std::abs(got - ref) <= 0.005, std::string(r.name) + " " + fmt("%.4f", got) + " vs oracle " +
                                                   fmt("%.4f", ref));
        values += std::string(values.empty() ? "" : " ") + r.name + "=" + fmt("%.2f%%", got);
    }
    c.note(values);
    c.note("max |d expected| " + fmt("%.4f", worst_expected) + " pp, max |d oracle| " + fmt("%.6f", worst_oracle) + " pp");
    c.note(fmt("%.1f ms", seconds_since(t0) * 1000));
}

// Default schedule keep counts and per-layer output counts of a real encode.
void ac2(Criterion& c) {
    const auto s = build_schedule(576, 72, kDefaultLayers);
    std::vector<std::size_t> keeps;
    for (const auto& st : s.stages()) keeps.push_back(st.keep);
    c.expect(keeps == kDefaultKeeps, "keep counts");

    std::vector<std::size_t> expected(12, 576);
    for (std::size_t k : kDefaultKeeps) expected.insert(expected.end(), 2, k);
    const Model m("vit-tiny-14", 42);
    const auto z0 = patch_embed(testing::random_image(336, 1), *m.weights);
    const auto r = encode(z0, queries(m, s, "what is the man holding?"), s, {}, *m.weights);
    c.expect(r.stats.layer_token_counts == expected, "per-layer output counts (24-layer encoder)");
    c.expect(r.tokens.patch_count() == 72, "final token count");
    c.note("keeps 492/408/324/240/156/72, 24-layer counts match");
}

// Whole-pipeline compute versus final visual token count.
void ac3(Criterion& c) {
    const auto cfg = EncoderConfig::preset("vit-l-14");
    const LlmConfig llm;
    std::vector<double> xs, ys;
    for (std::size_t m : {36, 72, 96, 120, 144, 576}) {
        xs.push_back(static_cast<double>(m));
        ys.push_back(static_cast<double>(pipeline_estimate(m, encoder_ratio(schedule_to(m), cfg, true), cfg.dim, llm)));
    }
    for (std::size_t i = 1; i < ys.size(); ++i) c.expect(ys[i] > ys[i - 1], "strictly increasing at M=" + fmt("%.0f", xs[i]));
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    const double r2 = sxy * sxy / (sxx * syy);
    c.expect(r2 > 0.99, "linear fit R^2 " + fmt("%.5f", r2));
    c.note("R^2 " + fmt("%.5f", r2) + ", estimate(72)/estimate(576) " + fmt("%.3f", ys[1] / ys.back()));
}

struct RawLayer {
    Matrix wq, wk, wv, wo;
    LayerWeights view() const {
        LayerWeights w;
        w.wq = &wq;
        w.wk = &wk;
        w.wv = &wv;
        w.wo = &wo;
        return w;
    }
};

double max_abs_diff(const Matrix& got, const oracle::Dense& want) {
    double worst = 0;
    for (std::size_t r = 0; r < got.rows(); ++r)
        for (std::size_t col = 0; col < got.cols(); ++col) worst = std::max(worst, std::abs(got(r, col) - want[r][col]));
    return worst;
}

TokenMatrix labeled(const Matrix& m) {
    TokenMatrix t;
    t.tokens = m;
    t.origin.push_back(kClsOrigin);
    for (std::size_t r = 1; r < m.rows(); ++r) t.origin.push_back(static_cast<Origin>(r - 1));
    return t;
}

// Oracle equivalence: attention, partition, recycling, plain encoder.
void ac4(Criterion& c) {
    std::mt19937_64 rng(2024);
    double worst_mhsa = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t heads = 1 + rng() % 4, dh = 1 + rng() % 8, d = heads * dh, n = 1 + rng() % 16;
        RawLayer l{oracle::random_matrix(rng, d, d), oracle::random_matrix(rng, d, d), oracle::random_matrix(rng, d, d),
                   oracle::random_matrix(rng, d, d)};
        const Matrix x = oracle::random_matrix(rng, n, d);
        const auto got = attention_forward(x, l.view(), heads);
        const auto ref = oracle::mhsa(oracle::to_dense(x), oracle::to_dense(l.wq), oracle::to_dense(l.wk),
                                      oracle::to_dense(l.wv), oracle::to_dense(l.wo), heads);
        worst_mhsa = std::max(worst_mhsa, max_abs_diff(got.output, ref.output));
    }
    c.expect(worst_mhsa <= 1e-5, "attention vs oracle " + fmt("%.2e", worst_mhsa));

    std::size_t partitions = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 1 + rng() % 600;
        std::vector<float> s(n);
        for (auto& v : s)
            v = trial % 2 ? static_cast<float>(rng() % 3) : std::uniform_real_distribution<float>(0, 1)(rng);
        std::vector<Origin> origins(n);
        std::iota(origins.begin(), origins.end(), 0);
        if (trial % 4 == 0) std::shuffle(origins.begin(), origins.end(), rng);
        const std::size_t keep = 1 + rng() % n;
        const auto rec = partition({s, 0}, keep, origins);
        const auto [kept, dropped] = oracle::sort_partition(s, origins, keep);
        c.expect(rec.kept == kept && rec.dropped == dropped, "partition trial " + std::to_string(trial));
        ++partitions;
    }

    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 30, d = 1 + rng() % 12;
        const TokenMatrix t = labeled(oracle::random_matrix(rng, n + 1, d));
        const Matrix a = softmax_rows(oracle::random_matrix(rng, n + 1, n + 1, -3, 3), 1.0);
        std::vector<float> s(n);
        for (auto& v : s) v = std::uniform_real_distribution<float>(0, 1)(rng);
        const auto rec = partition({s, 0}, 1 + rng() % n, t.patch_origins());
        c.expect(recycle(t, a, rec).tokens == oracle::recycle_double_loop(t.tokens, t.origin, a, rec.kept, rec.dropped),
                 "recycle trial " + std::to_string(trial));
    }

    const Model m("toy", 7);
    double worst_vit = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto z0 = patch_embed(testing::random_image(56, seed), *m.weights);
        const auto r = encode(z0, {}, CompressionSchedule(16, {}), {}, *m.weights);
        worst_vit = std::max(worst_vit, max_abs_diff(r.tokens.tokens, oracle::vit_forward(oracle::to_dense(z0.tokens),
                                                                                            m.archive, m.config)));
    }
    c.expect(worst_vit <= 1e-4, "plain encoder vs oracle " + fmt("%.2e", worst_vit));
    c.note("attention 200 cases max err " + fmt("%.1e", worst_mhsa) + ", partition " + std::to_string(partitions) +
           " cases, recycle 200 exact, encoder 10 cases max err " + fmt("%.1e", worst_vit));
}

// Byte comparison of two directory trees.
bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b) {
    const auto files = [](const std::filesystem::path& root) {
        std::map<std::string, std::string> out;
        for (const auto& e : std::filesystem::recursive_directory_iterator(root))
            if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = testing::read_bytes(e.path());
        return out;
    };
    return files(a) == files(b);
}

// Structural invariants and reproducibility.
void ac5(Criterion& c) {
    std::mt19937_64 rng(55);
    double worst_row = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t heads = 1 + rng() % 4, dh = 1 + rng() % 8, d = heads * dh, n = 1 + rng() % 40;
        RawLayer l{oracle::random_matrix(rng, d, d), oracle::random_matrix(rng, d, d), oracle::random_matrix(rng, d, d),
                   oracle::random_matrix(rng, d, d)};
        const auto out = attention_forward(oracle::random_matrix(rng, n, d, -2, 2), l.view(), heads);
        auto rows = out.attention.per_head;
        rows.push_back(out.attention.head_mean);
        for (const auto& a : rows)
            for (std::size_t i = 0; i < n; ++i) {
                double sum = 0;
                for (float v : a.row(i)) sum += v;
                worst_row = std::max(worst_row, std::abs(sum - 1.0));
            }
        AttentionProjections p;
        for (std::size_t h = 0; h < heads; ++h) p.k.push_back(oracle::random_matrix(rng, n + 1, dh));
        const Matrix q = oracle::random_matrix(rng, 1, d);
        const auto corr = correlation({{q.data().begin(), q.data().end()}, 0}, p);
        worst_row = std::max(worst_row, std::abs(std::accumulate(corr.scores.begin(), corr.scores.end(), 0.0) - 1.0));
    }
    c.expect(worst_row <= 1e-6, "row sums " + fmt("%.2e", worst_row));

    const Model tiny("vit-tiny-14", 42);
    for (const char* question : {"what color is the car?", "how many people are there?"}) {
        const auto s = build_schedule(576, 72, kDefaultLayers);
        const auto r = encode(patch_embed(testing::random_image(336, 9), *tiny.weights), queries(tiny, s, question), s,
                              {}, *tiny.weights);
        std::vector<Origin> previous(576);
        std::iota(previous.begin(), previous.end(), 0);
        for (const auto& rec : r.records) {
            std::vector<Origin> all;
            std::merge(rec.kept.begin(), rec.kept.end(), rec.dropped.begin(), rec.dropped.end(), std::back_inserter(all));
            c.expect(all == previous && std::is_sorted(rec.kept.begin(), rec.kept.end()), "nesting at layer " +
                                                                                             std::to_string(rec.layer));
            previous = rec.kept;
        }
    }

    std::size_t dominant = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 50, heads = 1 + rng() % 4, dh = 2 + rng() % 6;
        AttentionProjections p;
        const Matrix qm = oracle::random_matrix(rng, 1, heads * dh);
        const std::vector<float> q(qm.data().begin(), qm.data().end());
        const std::size_t star = rng() % n;
        for (std::size_t h = 0; h < heads; ++h) {
            double qn = 0;
            for (std::size_t k = 0; k < dh; ++k) qn += q[h * dh + k] * q[h * dh + k];
            Matrix k = oracle::random_matrix(rng, n + 1, dh);
            for (std::size_t r = 0; r <= n; ++r) {
                double kn = 0;
                for (std::size_t j = 0; j < dh; ++j) kn += k(r, j) * k(r, j);
                const double shrink = 0.9 * std::sqrt(qn / kn);
                for (std::size_t j = 0; j < dh; ++j)
                    k(r, j) = r == star + 1 ? 10.0f * q[h * dh + j]
                                            : static_cast<float>(k(r, j) * std::min(1.0, shrink));
            }
            p.k.push_back(std::move(k));
        }
        AttentionTensor att;
        att.head_mean = softmax_rows(oracle::random_matrix(rng, n + 1, n + 1), 1.0);
        const GuidanceVector query{q, 0};
        const auto r = compress_stage(labeled(oracle::random_matrix(rng, n + 1, heads * dh)), att, p, &query, 1, {});
        c.expect(r.record.kept == std::vector<Origin>{static_cast<Origin>(star)}, "dominant key trial " +
                                                                                        std::to_string(trial));
        ++dominant;
    }

    {
        const auto cfg = EncoderConfig::preset("toy");
        const TensorArchive source = gen_synthetic(3, cfg, "toy");
        TensorArchive zeroed;
        for (const auto& [name, t] : source.entries())
            zeroed.add(name, name == "patch.pos" ? Matrix(t.rows(), t.cols()) : t);
        const Model m(cfg, std::move(zeroed));
        const auto z0 = patch_embed(testing::random_image(56, 4), *m.weights);
        const auto s = build_schedule(16, 5, std::vector<std::size_t>{0, 2});
        const auto q = queries(m, s, "is there a dog?");
        const auto base = encode(z0, q, s, {}, *m.weights);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<std::size_t> perm(16);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            TokenMatrix zp = z0;
            for (std::size_t i = 0; i < 16; ++i) {
                std::copy(z0.tokens.row(perm[i] + 1).begin(), z0.tokens.row(perm[i] + 1).end(),
                          zp.tokens.row(i + 1).begin());
                zp.origin[i + 1] = z0.origin[perm[i] + 1];
            }
            const auto r = encode(zp, q, s, {}, *m.weights);
            c.expect(r.records == base.records, "permuted selection trial " + std::to_string(trial));
        }
    }

    const auto dir = testing::scratch_dir("acceptance_cli");
    write_ppm(testing::random_image(336, 12), dir / "img.ppm");
    const std::vector<std::vector<std::string>> commands = {
        {"schedule", "--to", "72"},
        {"flops", "--target", "72", "--guided", "--llm-dim", "4096", "--out", "{dir}/flops.json"},
        {"gen-weights", "--preset", "vit-tiny-14", "--seed", "42", "--out", "{dir}/w.qgvt"},
        {"run", "--image", (dir.parent_path() / "img.ppm").string(), "--weights", (dir.parent_path() / "w0.qgvt").string(),
         "--question", "what is on the table?", "--out-dir", "{dir}/out"},
        {"run", "--image", (dir.parent_path() / "img.ppm").string(), "--weights", (dir.parent_path() / "w0.qgvt").string(),
         "--guidance", "image-cls", "--no-recycle", "--out-dir", "{dir}/out"},
    };
    std::filesystem::rename(dir / "img.ppm", dir.parent_path() / "img.ppm");
    save_archive(tiny.archive, dir.parent_path() / "w0.qgvt");
    for (std::size_t i = 0; i < commands.size(); ++i) {
        std::string stdout_text[2];
        for (int rep = 0; rep < 2; ++rep) {
            const auto rundir = dir / ("cmd" + std::to_string(i) + "_" + std::to_string(rep));
            std::filesystem::create_directories(rundir);
            std::vector<std::string> args;
            for (auto a : commands[i]) {
                if (const auto pos = a.find("{dir}"); pos != std::string::npos) a.replace(pos, 5, rundir.string());
                args.push_back(a);
            }
            std::ostringstream out, err;
            c.expect(cli::run(args, out, err) == 0, commands[i][0] + " exit code: " + err.str());
            stdout_text[rep] = out.str();
            // Output paths differ between the two runs by design.
            if (const auto pos = stdout_text[rep].find(rundir.string()); pos != std::string::npos)
                stdout_text[rep].replace(pos, rundir.string().size(), "{dir}");
        }
        const auto d0 = dir / ("cmd" + std::to_string(i) + "_0"), d1 = dir / ("cmd" + std::to_string(i) + "_1");
        c.expect(stdout_text[0] == stdout_text[1] && same_tree(d0, d1), "rerun of " + commands[i][0] + " differs");
    }
    c.note("row sums max err " + fmt("%.1e", worst_row) + ", nesting ok, " + std::to_string(dominant) +
           " dominant-key cases, 20 permutations, " + std::to_string(commands.size()) + " CLI reruns identical");
}

// Archive format and generator.
void ac6(Criterion& c) {
    const auto cfg = EncoderConfig::preset("toy");
    const auto archive = gen_synthetic(9, cfg, "toy");
    const std::string bytes = serialize_archive(archive);
    c.expect(parse_archive(bytes) == archive, "in-memory round trip");
    c.expect(serialize_archive(parse_archive(bytes)) == bytes, "re-serialization bytes");
    const auto dir = testing::scratch_dir("acceptance_format");
    save_archive(archive, dir / "a.qgvt");
    c.expect(testing::read_bytes(dir / "a.qgvt") == bytes, "file bytes equal serialization");
    c.expect(load_archive(dir / "a.qgvt") == archive, "file round trip");

    const auto rejects = [&](std::string corrupted, const std::string& what) {
        bool ok = false;
        try {
            parse_archive(corrupted);
        } catch (const Error&) {
            ok = true;
        }
        c.expect(ok, "rejects " + what);
    };
    std::string s = bytes;
    s[0] = 'X';
    rejects(s, "bad magic");
    rejects(bytes.substr(0, 10), "short preamble");
    s = bytes;
    s[8] = static_cast<char>(0xFF);
    s[12] = static_cast<char>(0x7F);
    rejects(s, "oversized header length");
    s = bytes;
    const auto brace = s.find('{');
    s[brace] = '[';
    rejects(s, "non-object header");
    s = bytes;
    const auto off = s.find("\"offset\":");
    s[off + 9] = '9';
    rejects(s, "shifted offset");
    rejects(bytes.substr(0, bytes.size() - 4), "truncated payload");
    s = bytes;
    const auto shape = s.find("\"shape\":[");
    s[shape + 9] = s[shape + 9] == '9' ? '8' : '9';
    rejects(s, "shape/length mismatch");

    SplitMix64 g(0);
    const auto first = g.next();
    c.expect(first == 0xE220A8397B1DCDAFull, "splitmix64 seed 0");
    c.note("round trip bit-identical, 7 corruptions rejected, splitmix64(0) = 0x" + [&] {
        std::ostringstream o;
        o << std::hex << std::uppercase << first;
        return o.str();
    }());
}

// Full-scale forward timing and toy-scale suite timing.
void ac7(Criterion& c, double toy_seconds) {
    const auto cfg = EncoderConfig::preset("vit-l-14");
    const auto t_gen = std::chrono::steady_clock::now();
    const TensorArchive archive = gen_synthetic(42, cfg, "vit-l-14");
    const double gen_s = seconds_since(t_gen);
    const EncoderWeights weights(archive, cfg);

    PipelineRequest req;
    req.question = "what is written on the sign?";
    req.text = toy_text_embed(req.question, cfg.text_dim, 0);
    req.schedule = build_schedule(576, 72, kDefaultLayers);
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = run_pipeline(testing::random_image(336, 1), weights, req);
    const double forward_s = seconds_since(t0);

    std::vector<std::size_t> expected(12, 576);
    for (std::size_t k : kDefaultKeeps) expected.insert(expected.end(), 2, k);
    c.expect(result.encoded.stats.layer_token_counts == expected, "full-scale per-layer counts");
    c.expect(forward_s < 60.0, "full-scale forward took " + fmt("%.1f s", forward_s));
    c.expect(toy_seconds < 10.0, "toy-scale suites took " + fmt("%.1f s", toy_seconds));
    c.note("24-layer d=1024 forward " + fmt("%.1f s", forward_s) + " (weights generated in " + fmt("%.1f s", gen_s) +
           "), toy-scale suites " + fmt("%.1f s", toy_seconds));
}

}  // namespace
}  // namespace qgvt

int main() {
    using qgvt::Criterion;
    struct Entry {
        const char* id;
        const char* title;
        std::function<void(Criterion&)> run;
    };
    double toy_seconds = 0;
    const auto timed = [&](void (*f)(Criterion&)) {
        return [&toy_seconds, f](Criterion& c) {
            const auto t = std::chrono::steady_clock::now();
            f(c);
            toy_seconds += qgvt::seconds_since(t);
        };
    };
    const std::vector<Entry> entries = {
        {"AC1", "encoder FLOPs ratio for seven placements", qgvt::ac1},
        {"AC2", "default schedule and per-layer token counts", qgvt::ac2},
        {"AC3", "pipeline compute decreases almost linearly", qgvt::ac3},
        {"AC4", "oracle equivalence suites", timed(qgvt::ac4)},
        {"AC5", "invariant suites and reproducible CLI", timed(qgvt::ac5)},
        {"AC6", "archive format and generator", qgvt::ac6},
        {"AC7", "performance", [&](Criterion& c) { qgvt::ac7(c, toy_seconds); }},
    };

    int failed = 0;
    for (const auto& e : entries) {
        Criterion c;
        try {
            e.run(c);
        } catch (const std::exception& ex) {
            c.expect(false, std::string("exception: ") + ex.what());
        }
        failed += c.failed();
        std::cout << (c.failed() ? "FAIL " : "PASS ") << e.id << "  " << e.title << " (" << c.checks() << " checks) "
                  << c.notes() << '\n';
        for (const auto& f : c.failures()) std::cout << "    " << f << '\n';
        std::cout.flush();
    }
    std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criteria failed" : "acceptance: all criteria passed")
              << '\n';
    return failed ? 1 : 0;
}
