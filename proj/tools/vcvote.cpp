// vcvote: train, detect, evaluate, synthesize, occlude, plot, sweep.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vcvote/vcvote.hpp"

namespace fs = std::filesystem;
using namespace vcvote;

namespace {

struct Overrides {
    std::optional<double> gamma;
    std::optional<int> concepts;
    std::optional<int> supporting;
    std::optional<double> beta;
    std::optional<std::uint64_t> kmeans_seed;
    std::optional<std::string> vote_offsets;
    std::optional<int> jobs;
};

Config effective_config(const std::string& path, const Overrides& o) {
    Config c = path.empty() ? Config{} : load_config(path);
    if (o.gamma) c.neighborhood_radius = *o.gamma;
    if (o.concepts) c.concepts = *o.concepts;
    if (o.supporting) c.supporting = *o.supporting;
    if (o.beta) c.beta = *o.beta;
    if (o.kmeans_seed) c.kmeans_seed = *o.kmeans_seed;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.vote_offsets) {
        if (*o.vote_offsets == "all-nonzero") c.vote_offsets = VoteOffsets::all_nonzero;
        else if (*o.vote_offsets == "selected") c.vote_offsets = VoteOffsets::selected;
        else throw Error(Errc::validation, "invalid config\n  field 'vote_offsets': unknown value '" + *o.vote_offsets + "'");
    }
    c.validate();
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    out << text;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const auto comma = s.find(',', pos);
        const std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw Error(Errc::invalid_argument, "not an integer list: " + s);
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

/// Cells far from every part center, used as replacement vectors for occluded cells.
std::vector<std::vector<float>> background_pool(const std::vector<Scene>& scenes, double min_dist,
                                                std::size_t size, std::uint64_t seed) {
    std::vector<std::vector<float>> all;
    for (const Scene& s : scenes) {
        const LatticeSpec& spec = s.features.spec();
        for (int r = 0; r < spec.grid_h; ++r)
            for (int c = 0; c < spec.grid_w; ++c) {
                const ImagePos q = l0_of({r, c}, spec);
                bool far = true;
                for (const auto& p : s.annotations.parts)
                    if (pixel_distance(q, p.center) < min_dist) far = false;
                if (!far) continue;
                const auto f = s.features.at({r, c});
                all.emplace_back(f.begin(), f.end());
            }
    }
    if (all.empty()) throw Error(Errc::infeasible, "no cells far enough from the parts to form a background pool");
    std::mt19937_64 rng(seed);
    std::vector<std::vector<float>> out;
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    for (std::size_t i = 0; i < size; ++i) out.push_back(all[pick(rng)]);
    return out;
}

int cmd_config(const Config& cfg) {
    std::cout << format_config(cfg);
    return 0;
}

int cmd_train(const Config& cfg, const std::string& manifest, const std::string& out) {
    const auto m = read_manifest(manifest);
    const auto scenes = load_scenes(m);
    Model model = train_model(scenes, cfg.train_options());
    cfg.apply_nms(model);
    save_model(model, out);
    std::fprintf(stderr, "trained %zu parts, %d concepts, %d k-means iterations -> %s\n", model.parts.size(),
                 model.dictionary.size(), model.dictionary.iterations, out.c_str());
    return 0;
}

struct DetectArgs {
    std::string model, manifest, out, scales, score_maps, scale_out, baseline = "vt", vote_offsets;
    bool multiscale = false, oracle = false, exact = false;
    std::size_t max_detections = 0;
};

int cmd_detect(const Config& cfg, const DetectArgs& a) {
    const Model model = load_model(a.model);
    const auto m = read_manifest(a.manifest);
    DetectOptions opt;
    opt.vote = VoteParams::from(model.params);
    if (!a.vote_offsets.empty())
        opt.vote.offsets = a.vote_offsets == "selected" ? VoteOffsets::selected : VoteOffsets::all_nonzero;
    opt.vote.single_concept = a.baseline == "vc";
    opt.multiscale = a.multiscale;
    opt.oracle_scale = a.oracle;
    opt.exact_rerun = a.exact;
    opt.scales = a.scales.empty() ? (a.multiscale ? cfg.scales : std::vector<int>{}) : parse_int_list(a.scales);
    if (!opt.scales.empty()) ScaleSchedule{opt.scales}.validate();
    opt.max_detections = a.max_detections ? a.max_detections : cfg.max_detections;
    opt.jobs = cfg.jobs;
    if (!a.score_maps.empty()) opt.score_maps = fs::path(a.score_maps);
    const DetectOutput out = detect_dataset(m, model, opt);
    write_detections(out.detections, a.out);
    if (!a.scale_out.empty()) write_scale_records(out.scales, a.scale_out);
    std::fprintf(stderr, "%zu detections on %zu images -> %s\n", out.detections.size(), m.entries.size(),
                 a.out.c_str());
    return 0;
}

int cmd_evaluate(const Config& cfg, const std::string& manifest, const std::string& dets,
                 const std::string& scales, double iou_thresh, const std::string& out) {
    const auto m = read_manifest(manifest);
    const GroundTruthSet gt = load_ground_truth(m, cfg.training_short_edge);
    const auto d = read_detections(dets);
    EvalReport rep = evaluate(d, gt.parts, gt.image_class, iou_thresh);
    if (!scales.empty()) add_scale_loss(rep, read_scale_records(scales), gt);
    const std::string text = format_report(rep);
    if (out.empty()) std::cout << text;
    else write_text(out, text);
    return 0;
}

struct SynthArgs {
    std::string out, prefix = "scene";
    std::size_t scenes = 200;
    std::uint64_t first_seed = 0, spec_seed = 7, scale_seed = 1;
    int parts = 4, elements = 6, depth = 16, max_offset = 5, grid_h = 14, grid_w = 28, object_cells = 14;
    double noise = 0.05, decoy = 0.02, spread = 10.0, separation = 10.0, background = 1.0, firing = 1.0;
    bool multiscale = false;
    int original_edge = 500;
    double min_edge = 224, max_edge = 976, drift = 0.0;
};

SynthSpec synth_spec(const SynthArgs& a) {
    SynthSpec s = SynthSpec::make_default(a.spec_seed, a.parts, a.elements, a.depth, a.max_offset);
    s.noise_sigma = a.noise;
    s.decoy_rate = a.decoy;
    s.prototype_spread = a.spread;
    s.prototype_separation = a.separation;
    s.background_scale = a.background;
    s.scale_drift = a.drift;
    s.grid_h = a.grid_h;
    s.grid_w = a.grid_w;
    for (auto& p : s.parts)
        for (auto& e : p.elements) e.firing_probability = a.firing;
    return s;
}

int cmd_synthesize(const Config& cfg, const SynthArgs& a) {
    const SynthGenerator gen(synth_spec(a));
    fs::create_directories(a.out);
    if (!a.multiscale) {
        write_synth_dataset(gen.generate(a.scenes, a.first_seed, a.prefix), a.out);
    } else {
        std::mt19937_64 rng(a.scale_seed);
        std::uniform_real_distribution<double> edge(a.min_edge, a.max_edge);
        std::vector<MultiScaleScene> scenes;
        for (std::size_t i = 0; i < a.scenes; ++i) {
            char id[64];
            std::snprintf(id, sizeof id, "%s%05zu", a.prefix.c_str(), i);
            scenes.push_back(gen.generate_multiscale(a.first_seed + i, id, edge(rng), a.original_edge, cfg.scales,
                                                     a.object_cells));
        }
        write_multiscale_dataset(scenes, a.out);
    }
    nlohmann::ordered_json j;
    j["spec_seed"] = a.spec_seed;
    j["parts"] = a.parts;
    j["elements"] = a.elements;
    j["depth"] = a.depth;
    j["max_offset"] = a.max_offset;
    j["noise"] = a.noise;
    j["decoy_rate"] = a.decoy;
    j["spread"] = a.spread;
    j["separation"] = a.separation;
    j["background"] = a.background;
    j["firing_probability"] = a.firing;
    j["scenes"] = a.scenes;
    j["first_seed"] = a.first_seed;
    j["multiscale"] = a.multiscale;
    if (a.multiscale) {
        j["original_edge"] = a.original_edge;
        j["min_edge"] = a.min_edge;
        j["max_edge"] = a.max_edge;
        j["drift"] = a.drift;
        j["scale_seed"] = a.scale_seed;
    }
    write_text(fs::path(a.out) / "synth.json", j.dump(2) + "\n");
    std::fprintf(stderr, "%zu scenes -> %s\n", a.scenes, (fs::path(a.out) / "manifest.txt").c_str());
    return 0;
}

struct OccludeArgs {
    std::string manifest, out, mode = "resample";
    int occluders = 2, shapes = 8, min_axis = 24, max_axis = 96;
    std::uint64_t seed = 0;
    std::size_t pool = 1000;
    double distractor_sigma = 0.05;
};

int cmd_occlude(const Config& cfg, const OccludeArgs& a) {
    const auto m = read_manifest(a.manifest);
    const auto scenes = load_scenes(m);
    const OcclusionConfig base = OcclusionConfig::regime(a.occluders, a.seed);
    const auto shapes = random_ellipses(a.shapes, a.min_axis, a.max_axis, a.seed ^ 0xe111);
    CorruptOptions co;
    co.mode = a.mode == "occluder-concept" ? CorruptMode::occluder_concept : CorruptMode::resample;
    const auto pool = background_pool(scenes, cfg.min_neg_distance, a.pool, a.seed);
    if (co.mode == CorruptMode::resample) co.pool = pool;
    else {
        co.distractor = pool.front();
        co.distractor_sigma = a.distractor_sigma;
    }
    fs::create_directories(a.out);
    DatasetManifest outm;
    outm.base_dir = a.out;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const Scene& s = scenes[i];
        const ManifestEntry& e = m.entries[i];
        const LatticeSpec& spec = s.features.spec();
        if (spec.image_h != e.image_h || spec.image_w != e.image_w)
            throw Error(Errc::invalid_argument, "scene " + e.id + ": features are not at annotation resolution");
        if (s.annotations.objects.empty()) throw Error(Errc::invalid_argument, "scene " + e.id + " has no object box");
        OcclusionConfig oc = base;
        oc.seed = a.seed * 1000003ULL + i;
        const BinaryMask target = box_mask(s.annotations.objects.front().box, spec.image_h, spec.image_w);
        const OcclusionResult r = synthesize_occlusion(target, s.annotations, shapes, oc);
        co.seed = oc.seed;
        const FeatureMap fm = corrupt_features(s.features, r.composite, co);
        ManifestEntry ne = e;
        ne.features = e.id + ".vcf";
        ne.annotations = e.id + ".vca";
        ne.scaled_features.clear();
        char occ[256];
        std::snprintf(occ, sizeof occ, "occluders=%d,ratio=%.6f,bin=%.1f-%.1f,mode=%s,seed=%llu,mask=%s.pgm",
                      a.occluders, r.ratio, oc.ratio_lo, oc.ratio_hi, to_string(co.mode),
                      static_cast<unsigned long long>(oc.seed), e.id.c_str());
        ne.occlusion = occ;
        write_feature_map(fm, fs::path(a.out) / ne.features);
        write_scene_annotations(r.annotations, fs::path(a.out) / ne.annotations);
        write_mask(r.composite, fs::path(a.out) / (e.id + ".pgm"));
        outm.entries.push_back(std::move(ne));
    }
    write_manifest(outm, fs::path(a.out) / "manifest.txt");
    std::fprintf(stderr, "%zu occluded scenes -> %s\n", outm.entries.size(), (fs::path(a.out) / "manifest.txt").c_str());
    return 0;
}

struct PlotArgs {
    std::string model, kind = "offset", out, manifest, scene;
    int part = 0, concept_id = -1, cell_px = 24;
};

int cmd_plot(const PlotArgs& a) {
    const Model model = load_model(a.model);
    const PartModel& part = model.part(a.part);
    const int v = a.concept_id >= 0 ? a.concept_id : part.supporting.front();
    if (a.kind == "offset") {
        plot_offset_map(part.cue(v).offsets, a.cell_px).write(a.out);
    } else if (a.kind == "distributions") {
        plot_distributions(part.cue(v).cue.hist_pos, part.cue(v).cue.hist_neg).write(a.out);
    } else if (a.kind == "score-curve") {
        plot_curve(part.cue(v).cue.score_table).write(a.out);
    } else if (a.kind == "score-map") {
        if (a.manifest.empty() || a.scene.empty())
            throw Error(Errc::invalid_argument, "score-map plots need --manifest and --scene");
        const auto m = read_manifest(a.manifest);
        const auto it = std::find_if(m.entries.begin(), m.entries.end(), [&](const auto& e) { return e.id == a.scene; });
        if (it == m.entries.end()) throw Error(Errc::invalid_argument, "no scene " + a.scene + " in the manifest");
        const FeatureMap fm = read_feature_map(m.resolve(it->features));
        heatmap(upsample(part_score_map(fm, part, model.dictionary, VoteParams::from(model.params)), fm.spec()))
            .write(a.out);
    } else {
        throw Error(Errc::invalid_argument, "unknown plot kind " + a.kind);
    }
    return 0;
}

int cmd_sweep(const Config& cfg, const std::string& train, const std::string& test, const std::string& ks) {
    const auto tm = read_manifest(train);
    const auto scenes = load_scenes(tm);
    const auto te = read_manifest(test);
    const TrainOptions opt = cfg.train_options();
    Model base;
    base.params = opt.params;
    base.dictionary = train_dictionary(scenes, opt);
    const auto stats = collect_statistics(scenes, base.dictionary, opt);
    const GroundTruthSet gt = load_ground_truth(te, cfg.training_short_edge);
    std::printf("# K mean_ap delta\n");
    double first = 0.0;
    bool have_first = false;
    for (int k : parse_int_list(ks)) {
        Model m = base;
        m.params.supporting = k;
        for (const auto& ps : stats) m.parts.push_back(make_part_model(ps, scenes, k));
        cfg.apply_nms(m);
        DetectOptions d;
        d.vote = VoteParams::from(m.params);
        d.max_detections = cfg.max_detections;
        d.jobs = cfg.jobs;
        const auto dets = detect_dataset(te, m, d).detections;
        const double ap = evaluate(dets, gt.parts, gt.image_class).mean_ap();
        if (!have_first) {
            first = ap;
            have_first = true;
        }
        std::printf("%d %.6f %+.6f\n", k, ap, ap - first);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic part detection by voting of visual concepts"};
    app.require_subcommand(1);
    std::string config_path;
    Overrides ov;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--jobs", ov.jobs, "Worker threads")->check(CLI::PositiveNumber);

    auto* config = app.add_subcommand("config", "Print the effective configuration");

    std::string manifest, out;
    auto* train = app.add_subcommand("train", "Learn concepts, offset maps and cue models");
    train->add_option("--manifest", manifest, "Training manifest")->required();
    train->add_option("--out", out, "Model bundle (.vcm)")->required();
    train->add_option("--concepts", ov.concepts, "Dictionary size |V|");
    train->add_option("--supporting,--k", ov.supporting, "Supporting concepts per part K");
    train->add_option("--gamma", ov.gamma, "Neighborhood radius in pixels");
    train->add_option("--beta", ov.beta, "Spatial-term weight");
    train->add_option("--seed", ov.kmeans_seed, "k-means seed");
    train->add_option("--vote-offsets", ov.vote_offsets, "all-nonzero | selected");

    DetectArgs da;
    auto* detect = app.add_subcommand("detect", "Detect parts");
    detect->add_option("--model", da.model, "Model bundle")->required()->check(CLI::ExistingFile);
    detect->add_option("--manifest", da.manifest, "Test manifest")->required();
    detect->add_option("--out", da.out, "Detections file")->required();
    detect->add_flag("--multiscale", da.multiscale, "Predict the scale, then rerun at it");
    detect->add_option("--scales", da.scales, "Comma-separated short edges overriding the schedule");
    detect->add_flag("--oracle-scale", da.oracle, "Rescale with the ground-truth object box");
    detect->add_flag("--exact-rerun", da.exact, "Rerun at round(Sc*) when such features exist");
    detect->add_option("--score-maps", da.score_maps, "Directory for score-map heatmaps");
    detect->add_option("--scale-out", da.scale_out, "Write scale predictions here");
    detect->add_option("--baseline", da.baseline, "vt (all supporting concepts) or vc (top concept only)")
        ->check(CLI::IsMember({"vt", "vc"}));
    detect->add_option("--vote-offsets", da.vote_offsets, "all-nonzero | selected")
        ->check(CLI::IsMember({"all-nonzero", "selected"}));
    detect->add_option("--max-detections", da.max_detections, "Per part and image");

    std::string dets_path, scales_path;
    double iou_thresh = 0.5;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score detections against annotations");
    evaluate_cmd->add_option("--manifest", manifest, "Manifest with annotations")->required();
    evaluate_cmd->add_option("--detections", dets_path, "Detections file")->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--scale-predictions", scales_path, "Scale predictions from detect --scale-out");
    evaluate_cmd->add_option("--iou", iou_thresh, "IoU threshold")->check(CLI::Range(0.0, 1.0));
    evaluate_cmd->add_option("--out", out, "Report file (default stdout)");

    SynthArgs sa;
    auto* synth = app.add_subcommand("synthesize", "Generate a synthetic dataset");
    synth->add_option("--out", sa.out, "Output directory")->required();
    synth->add_option("--scenes", sa.scenes, "Number of scenes");
    synth->add_option("--first-seed", sa.first_seed, "Seed of the first scene");
    synth->add_option("--prefix", sa.prefix, "Scene id prefix");
    synth->add_option("--spec-seed", sa.spec_seed, "Seed for prototypes and constellations");
    synth->add_option("--parts", sa.parts, "Parts per object")->check(CLI::PositiveNumber);
    synth->add_option("--elements", sa.elements, "Constellation elements per part")->check(CLI::PositiveNumber);
    synth->add_option("--depth", sa.depth, "Feature depth")->check(CLI::PositiveNumber);
    synth->add_option("--max-offset", sa.max_offset, "Largest constellation offset in cells")->check(CLI::Range(2, 7));
    synth->add_option("--noise", sa.noise, "Noise sigma on planted vectors");
    synth->add_option("--decoy-rate", sa.decoy, "Chance a background cell holds a stray prototype");
    synth->add_option("--spread", sa.spread, "Prototype coordinate range");
    synth->add_option("--separation", sa.separation, "Minimum prototype distance");
    synth->add_option("--background", sa.background, "Background standard deviation");
    synth->add_option("--firing", sa.firing, "Firing probability of every element");
    synth->add_option("--grid-h", sa.grid_h, "Training grid rows");
    synth->add_option("--grid-w", sa.grid_w, "Training grid columns");
    synth->add_flag("--multiscale", sa.multiscale, "Render every scene at each scheduled scale");
    synth->add_option("--original-edge", sa.original_edge, "Original image short edge");
    synth->add_option("--min-edge", sa.min_edge, "Smallest ideal short edge");
    synth->add_option("--max-edge", sa.max_edge, "Largest ideal short edge");
    synth->add_option("--drift", sa.drift, "Appearance drift per unit log scale");
    synth->add_option("--object-cells", sa.object_cells, "Object size in cells at training scale");
    synth->add_option("--scale-seed", sa.scale_seed, "Seed for the ideal short edges");

    OccludeArgs oa;
    auto* occlude = app.add_subcommand("occlude", "Superimpose occluders and corrupt covered features");
    occlude->add_option("--manifest", oa.manifest, "Input manifest")->required();
    occlude->add_option("--out", oa.out, "Output directory")->required();
    occlude->add_option("--occluders", oa.occluders, "2, 3 or 4 (ratio bins [.2,.4), [.4,.6), [.6,.8))")
        ->check(CLI::Range(2, 4));
    occlude->add_option("--seed", oa.seed, "Placement seed");
    occlude->add_option("--mode", oa.mode, "resample | occluder-concept")
        ->check(CLI::IsMember({"resample", "occluder-concept"}));
    occlude->add_option("--shapes", oa.shapes, "Number of ellipse occluder shapes")->check(CLI::PositiveNumber);
    occlude->add_option("--min-axis", oa.min_axis, "Smallest ellipse semi-axis")->check(CLI::PositiveNumber);
    occlude->add_option("--max-axis", oa.max_axis, "Largest ellipse semi-axis")->check(CLI::PositiveNumber);
    occlude->add_option("--pool", oa.pool, "Background pool size");
    occlude->add_option("--distractor-sigma", oa.distractor_sigma, "Spread of occluder-concept vectors");

    PlotArgs pa;
    auto* plot = app.add_subcommand("plot", "Render model diagnostics as PPM images");
    plot->add_option("--model", pa.model, "Model bundle")->required()->check(CLI::ExistingFile);
    plot->add_option("--part", pa.part, "Part id");
    plot->add_option("--concept", pa.concept_id, "Concept index (default: top supporting)");
    plot->add_option("--kind", pa.kind, "offset | distributions | score-curve | score-map")
        ->check(CLI::IsMember({"offset", "distributions", "score-curve", "score-map"}));
    plot->add_option("--manifest", pa.manifest, "Manifest for score-map plots");
    plot->add_option("--scene", pa.scene, "Scene id for score-map plots");
    plot->add_option("--cell-px", pa.cell_px, "Pixels per offset cell")->check(CLI::PositiveNumber);
    plot->add_option("--out", pa.out, "Output .ppm")->required();

    std::string test_manifest, ks = "45,30,20,10";
    auto* sweep = app.add_subcommand("sweep", "Mean AP as the supporting-set size K varies");
    sweep->add_option("--train", manifest, "Training manifest")->required();
    sweep->add_option("--test", test_manifest, "Test manifest")->required();
    sweep->add_option("--k", ks, "Comma-separated K values; deltas are relative to the first");
    sweep->add_option("--concepts", ov.concepts, "Dictionary size |V|");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed() && !ov.supporting) {
            const auto k = parse_int_list(ks);
            if (!k.empty()) ov.supporting = *std::min_element(k.begin(), k.end());
        }
        const Config cfg = effective_config(config_path, ov);
        if (config->parsed()) return cmd_config(cfg);
        if (train->parsed()) return cmd_train(cfg, manifest, out);
        if (detect->parsed()) return cmd_detect(cfg, da);
        if (evaluate_cmd->parsed()) return cmd_evaluate(cfg, manifest, dets_path, scales_path, iou_thresh, out);
        if (synth->parsed()) return cmd_synthesize(cfg, sa);
        if (occlude->parsed()) return cmd_occlude(cfg, oa);
        if (plot->parsed()) return cmd_plot(pa);
        if (sweep->parsed()) return cmd_sweep(cfg, manifest, test_manifest, ks);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
