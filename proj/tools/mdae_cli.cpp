#include "mdae/evaluate.hpp"
#include "mdae/preprocess.hpp"
#include "mdae/render.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mdae;

namespace {

void log_line(const json& fields) { std::cerr << fields.dump() << '\n'; }

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

FileFormat format_of(const std::string& path) {
    return has_suffix(path, ".csv") ? FileFormat::Csv : FileFormat::Binary;
}

MotionSequence load_seq(const std::string& path, double unit_scale, double rate) {
    MotionSequence seq = load_sequence(path, format_of(path), unit_scale);
    if (rate > 0) seq.rate = rate;
    return seq;
}

std::string resolve(const std::string& manifest_path, const std::string& entry_path) {
    const fs::path p(entry_path);
    if (p.is_absolute()) return entry_path;
    return (fs::path(manifest_path).parent_path() / p).string();
}

struct EmbeddingRow {
    std::string path;
    SampleMeta meta;
    Split split = Split::Train;
    Eigen::VectorXd z;
};

void write_embeddings(const std::vector<EmbeddingRow>& rows, const std::string& path) {
    if (rows.empty()) throw Error("no embeddings to write");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    out << "path,participant,technique,grade_index,limb_side,split";
    for (int i = 0; i < rows[0].z.size(); ++i) out << ",z" << i;
    out << '\n';
    for (const auto& r : rows) {
        out << r.path << ',' << r.meta.participant_id << ','
            << technique_name(r.meta.technique) << ',' << r.meta.grade_index << ','
            << r.meta.limb_side << ',' << split_name(r.split);
        for (int i = 0; i < r.z.size(); ++i) out << ',' << r.z(i);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<EmbeddingRow> read_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty embedding file", 1);
    std::vector<EmbeddingRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() < 7) throw ParseError("short embedding row", lineno);
        EmbeddingRow r;
        r.path = cells[0];
        r.meta.participant_id = cells[1];
        r.meta.technique = technique_from_name(cells[2]);
        r.meta.grade_index = std::stoi(cells[3]);
        r.meta.limb_side = cells[4];
        r.split = split_from_name(cells[5]);
        r.z.resize(static_cast<Eigen::Index>(cells.size() - 6));
        for (std::size_t i = 6; i < cells.size(); ++i) {
            r.z(static_cast<Eigen::Index>(i - 6)) = std::stod(cells[i]);
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw ParseError("no embedding rows", lineno);
    return rows;
}

std::vector<Eigen::VectorXd> embedding_vectors(const std::vector<EmbeddingRow>& rows) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& r : rows) out.push_back(r.z);
    return out;
}

std::vector<SampleMeta> embedding_labels(const std::vector<EmbeddingRow>& rows) {
    std::vector<SampleMeta> out;
    for (const auto& r : rows) out.push_back(r.meta);
    return out;
}

json report_to_json(const AnatomyReport& rep) {
    return {{"per_link_distance_std", rep.per_link_distance_std},
            {"mean_distance_std", rep.mean_distance_std},
            {"mean_round_trip_error", rep.mean_round_trip_error},
            {"max_round_trip_error", rep.max_round_trip_error}};
}

int run(int argc, char** argv) {
    CLI::App app{"Motion autoencoding and attribute manipulation toolkit"};
    app.set_config("--config", "", "Config file (flags override its values)");
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand
    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("--seed", seed, "RNG seed")->capture_default_str();
    app.add_option("--threads", threads, "Worker thread cap (0 = runtime default)")
        ->capture_default_str();
    app.parse_complete_callback([&] { set_thread_cap(threads); });

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
    std::string synth_out = "synth-data";
    SynthConfig synth_cfg;
    synth->add_option("--out", synth_out, "Output directory")->capture_default_str();
    synth->add_option("--classes", synth_cfg.classes, "Technique classes (2-5)")
        ->capture_default_str();
    synth->add_option("--grades", synth_cfg.grade_indices, "Grade indices (0-12)")
        ->capture_default_str();
    synth->add_option("--per-cell", synth_cfg.samples_per_cell,
                      "Samples per (class, grade) cell")
        ->capture_default_str();
    synth->add_option("--frames", synth_cfg.frames, "Frames per sample")
        ->capture_default_str();
    synth->add_option("--rate", synth_cfg.rate, "Sample rate, Hz")->capture_default_str();
    synth->callback([&] {
        SynthDataset ds = generate_synthetic_dataset(synth_cfg, seed);
        fs::create_directories(synth_out);
        for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "sample_%04zu.mdae", i);
            save_sequence(ds.sequences[i], (fs::path(synth_out) / name).string(),
                          FileFormat::Binary);
            ds.manifest.entries[i].path = name;
        }
        save_manifest(ds.manifest, (fs::path(synth_out) / "manifest.json").string());
        log_line({{"event", "synth"},
                  {"samples", ds.sequences.size()},
                  {"out", synth_out}});
    });

    // ---- prep ----
    auto* prep = app.add_subcommand("prep", "Preprocess a dataset");
    std::string prep_manifest, prep_out = "prepped", prep_root, prep_facing,
                prep_mirror_json, prep_wand_json, prep_trim, prep_report;
    double prep_rate = 0.0, prep_zthresh = 3.0;
    prep->add_option("--manifest", prep_manifest, "Dataset manifest")->required();
    prep->add_option("--out", prep_out, "Output directory")->capture_default_str();
    prep->add_option("--rate", prep_rate, "Downsample to this rate, Hz (0 = keep)");
    prep->add_option("--z-thresh", prep_zthresh, "Outlier z-score threshold")
        ->capture_default_str();
    prep->add_option("--root-marker", prep_root, "Center this marker at the origin");
    prep->add_option("--facing-markers", prep_facing,
                     "left,right marker pair for facing normalization");
    prep->add_option("--mirror-pairs", prep_mirror_json,
                     "JSON [[left,right],...]; mirrors left-limb samples");
    prep->add_option("--wand-triples", prep_wand_json, "JSON [[a,wand,b],...]");
    prep->add_option("--trim", prep_trim, "start:end frame range to keep");
    prep->add_option("--report", prep_report, "Outlier report JSON path");
    prep->callback([&] {
        DatasetManifest manifest = load_manifest(prep_manifest);
        std::vector<std::pair<std::string, std::string>> mirror_pairs;
        if (!prep_mirror_json.empty()) {
            for (const auto& p : json::parse(prep_mirror_json)) {
                mirror_pairs.emplace_back(p.at(0).get<std::string>(),
                                          p.at(1).get<std::string>());
            }
        }
        std::vector<std::array<std::string, 3>> wand_triples;
        if (!prep_wand_json.empty()) {
            for (const auto& t : json::parse(prep_wand_json)) {
                wand_triples.push_back({t.at(0).get<std::string>(),
                                        t.at(1).get<std::string>(),
                                        t.at(2).get<std::string>()});
            }
        }
        int trim_start = -1, trim_end = -1;
        if (!prep_trim.empty()) {
            const auto colon = prep_trim.find(':');
            if (colon == std::string::npos) throw Error("--trim expects start:end");
            trim_start = std::stoi(prep_trim.substr(0, colon));
            trim_end = std::stoi(prep_trim.substr(colon + 1));
        }
        std::string facing_left, facing_right;
        if (!prep_facing.empty()) {
            const auto comma = prep_facing.find(',');
            if (comma == std::string::npos) {
                throw Error("--facing-markers expects left,right");
            }
            facing_left = prep_facing.substr(0, comma);
            facing_right = prep_facing.substr(comma + 1);
        }

        fs::create_directories(prep_out);
        std::vector<MotionSequence> processed;
        for (auto& entry : manifest.entries) {
            MotionSequence seq = load_seq(resolve(prep_manifest, entry.path),
                                          manifest.unit_scale, 0.0);
            if (trim_start >= 0) seq = trim(seq, trim_start, trim_end);
            if (prep_rate > 0) seq = downsample(seq, prep_rate);
            if (!wand_triples.empty()) seq = center_wand_markers(seq, wand_triples);
            if (!mirror_pairs.empty() && entry.meta.limb_side == "left") {
                seq = mirror_left_to_right(seq, mirror_pairs);
                entry.meta.limb_side = "right";
            }
            if (!prep_root.empty()) seq = center_to_origin(seq, prep_root);
            if (!facing_left.empty()) {
                seq = rotate_to_facing(seq, facing_left, facing_right);
            }
            const std::string name = fs::path(entry.path).stem().string() + ".mdae";
            save_sequence(seq, (fs::path(prep_out) / name).string(), FileFormat::Binary);
            entry.path = name;
            processed.push_back(std::move(seq));
        }
        manifest.unit_scale = 1.0;
        save_manifest(manifest, (fs::path(prep_out) / "manifest.json").string());

        const OutlierReport rep = detect_outliers(processed, prep_zthresh, "");
        json findings = json::array();
        for (const auto& f : rep.findings) {
            findings.push_back({{"index", f.index},
                                {"statistic", f.statistic},
                                {"value", f.value},
                                {"z_score", f.z_score}});
        }
        const json rep_json = {{"findings", findings},
                               {"durations", rep.durations},
                               {"displacements", rep.displacements}};
        if (!prep_report.empty()) {
            std::ofstream out(prep_report);
            if (!out) throw IoError("cannot write " + prep_report);
            out << rep_json.dump(2) << '\n';
        }
        log_line({{"event", "prep"},
                  {"sequences", processed.size()},
                  {"outliers", rep.findings.size()},
                  {"out", prep_out}});
    });

    // ---- features ----
    auto* feat = app.add_subcommand("features", "Coordinates -> pose features");
    std::string feat_in, feat_chain, feat_out;
    double feat_scale = 1.0, feat_rate = 0.0;
    feat->add_option("--in", feat_in, "Motion file (.csv or .mdae)")->required();
    feat->add_option("--chain", feat_chain, "Chain JSON")->required();
    feat->add_option("--out", feat_out, "Feature file (.mdaf)")->required();
    feat->add_option("--unit-scale", feat_scale, "CSV unit scale (0.001 = mm)")
        ->capture_default_str();
    feat->add_option("--rate", feat_rate, "Rate override for CSV input, Hz");
    feat->callback([&] {
        const MotionSequence seq = load_seq(feat_in, feat_scale, feat_rate);
        const SkeletonChain chain = load_chain(feat_chain);
        save_features(encode_sequence(seq, chain), feat_out);
        log_line({{"event", "features"}, {"frames", seq.frames()}, {"out", feat_out}});
    });

    // ---- coords ----
    auto* coords = app.add_subcommand("coords", "Pose features -> coordinates");
    std::string coords_in, coords_out;
    coords->add_option("--in", coords_in, "Feature file (.mdaf)")->required();
    coords->add_option("--out", coords_out, "Motion file (.csv or .mdae)")->required();
    coords->callback([&] {
        const MotionSequence seq = decode_sequence(load_features(coords_in));
        save_sequence(seq, coords_out, format_of(coords_out));
        log_line({{"event", "coords"}, {"frames", seq.frames()}, {"out", coords_out}});
    });

    // ---- check-anatomy ----
    auto* anat = app.add_subcommand("check-anatomy",
                                    "Rigidity and round-trip report for a dataset");
    std::string anat_manifest, anat_chain;
    anat->add_option("--manifest", anat_manifest, "Dataset manifest")->required();
    anat->add_option("--chain", anat_chain, "Chain JSON")->required();
    anat->callback([&] {
        const DatasetManifest manifest = load_manifest(anat_manifest);
        std::vector<MotionSequence> dataset;
        for (const auto& entry : manifest.entries) {
            dataset.push_back(load_seq(resolve(anat_manifest, entry.path),
                                       manifest.unit_scale, 0.0));
        }
        const AnatomyReport rep = anatomy_report(dataset, load_chain(anat_chain));
        std::cout << report_to_json(rep).dump(2) << '\n';
    });

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "Train the autoencoding model");
    std::string train_manifest, train_chain, train_out = "model.mdam";
    TrainConfig tcfg;
    Dims dims;
    std::string sched_name = "cosine";
    int sched_T = 1000, log_every = 50;
    train_cmd->add_option("--manifest", train_manifest, "Dataset manifest")->required();
    train_cmd->add_option("--chain", train_chain, "Chain JSON")->required();
    train_cmd->add_option("--out", train_out, "Checkpoint path")->capture_default_str();
    train_cmd->add_option("--steps", tcfg.steps)->capture_default_str();
    train_cmd->add_option("--batch", tcfg.batch_size)->capture_default_str();
    train_cmd->add_option("--lr", tcfg.learning_rate)->capture_default_str();
    train_cmd->add_option("--phi-pos", tcfg.phi_pos)->capture_default_str();
    train_cmd->add_option("--phi-foot", tcfg.phi_foot)->capture_default_str();
    train_cmd->add_option("--phi-vel", tcfg.phi_vel)->capture_default_str();
    train_cmd->add_option("--schedule", sched_name, "cosine | linear")
        ->capture_default_str();
    train_cmd->add_option("--T", sched_T, "Diffusion steps")->capture_default_str();
    train_cmd->add_option("--d-model", dims.d_model)->capture_default_str();
    train_cmd->add_option("--heads", dims.heads)->capture_default_str();
    train_cmd->add_option("--layers", dims.layers)->capture_default_str();
    train_cmd->add_option("--d-ff", dims.d_ff)->capture_default_str();
    train_cmd->add_option("--d-z", dims.d_z)->capture_default_str();
    train_cmd->add_option("--max-frames", dims.max_frames)->capture_default_str();
    train_cmd->add_option("--log-every", log_every)->capture_default_str();
    train_cmd->callback([&] {
        tcfg.seed = seed;
        const DatasetManifest manifest = load_manifest(train_manifest);
        const SkeletonChain chain_spec = load_chain(train_chain);
        std::vector<BatchItem> items;
        SkeletonChain chain = chain_spec;
        std::vector<std::string> foot_markers;
        for (const auto& entry : manifest.entries) {
            if (entry.split != Split::Train) continue;
            const MotionSequence seq = load_seq(resolve(train_manifest, entry.path),
                                                manifest.unit_scale, 0.0);
            const PoseFeatures f = encode_sequence(seq, chain_spec);
            BatchItem item;
            item.x0 = f.as_tensor();
            item.n_real = f.frames();
            item.contacts = f.contacts;
            items.push_back(std::move(item));
            chain = f.chain; // measured distances from the last sample
            foot_markers = f.foot_markers;
        }
        if (items.empty()) throw Error("train: no training-split sequences");
        dims.feature_dim = 3 + 6 * chain.link_count();
        for (const auto& item : items) {
            dims.max_frames = std::max(dims.max_frames, item.n_real);
        }

        Rng rng(tcfg.seed);
        ModelParams model = init_model(dims, rng);
        model.sched_kind =
            sched_name == "linear" ? ScheduleKind::Linear : ScheduleKind::Cosine;
        model.sched_T = sched_T;
        const NoiseSchedule sched = make_schedule(model.sched_kind, model.sched_T);
        Optimizer opt = make_optimizer(model);
        std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
        for (int step = 0; step < tcfg.steps; ++step) {
            std::vector<BatchItem> batch;
            for (int b = 0; b < tcfg.batch_size; ++b) batch.push_back(items[pick(rng)]);
            bool skipped = false;
            const LossBreakdown loss = train_step(model, opt, batch, tcfg, sched, chain,
                                                  foot_markers, rng, &skipped);
            if (step % log_every == 0 || step + 1 == tcfg.steps || skipped) {
                log_line({{"event", "train"},
                          {"step", step},
                          {"loss", loss.total},
                          {"simple", loss.simple},
                          {"pos", loss.pos},
                          {"foot", loss.foot},
                          {"vel", loss.vel},
                          {"skipped", skipped}});
            }
        }
        save_checkpoint(model, tcfg, train_out);
        log_line({{"event", "checkpoint"},
                  {"out", train_out},
                  {"parameters", model.params.scalar_count()}});
    });

    // ---- embed ----
    auto* embed = app.add_subcommand("embed", "Semantic embeddings for a dataset");
    std::string embed_manifest, embed_chain, embed_model, embed_out, embed_split = "all";
    embed->add_option("--manifest", embed_manifest, "Dataset manifest")->required();
    embed->add_option("--chain", embed_chain, "Chain JSON")->required();
    embed->add_option("--model", embed_model, "Checkpoint")->required();
    embed->add_option("--out", embed_out, "Embedding CSV")->required();
    embed->add_option("--split", embed_split, "train | validation | test | all")
        ->capture_default_str();
    embed->callback([&] {
        const DatasetManifest manifest = load_manifest(embed_manifest);
        const SkeletonChain chain = load_chain(embed_chain);
        const Checkpoint ckpt = load_checkpoint(embed_model);
        std::vector<EmbeddingRow> rows;
        for (const auto& entry : manifest.entries) {
            if (embed_split != "all" && split_from_name(embed_split) != entry.split) {
                continue;
            }
            const MotionSequence seq = load_seq(resolve(embed_manifest, entry.path),
                                                manifest.unit_scale, 0.0);
            const PoseFeatures f = encode_sequence(seq, chain);
            EmbeddingRow row;
            row.path = entry.path;
            row.meta = entry.meta;
            row.split = entry.split;
            row.z = semantic_encode(ckpt.model, f.as_tensor(), f.frames());
            rows.push_back(std::move(row));
        }
        write_embeddings(rows, embed_out);
        log_line({{"event", "embed"}, {"rows", rows.size()}, {"out", embed_out}});
    });

    // ---- train-head ----
    auto* thead = app.add_subcommand("train-head", "Fit the linear attribute head");
    std::string thead_in, thead_out = "head.mdah";
    HeadTrainOptions hopts;
    thead->add_option("--embeddings", thead_in, "Embedding CSV")->required();
    thead->add_option("--out", thead_out, "Head file")->capture_default_str();
    thead->add_option("--lr", hopts.learning_rate)->capture_default_str();
    thead->add_option("--steps", hopts.steps)->capture_default_str();
    thead->add_option("--l2", hopts.l2)->capture_default_str();
    thead->callback([&] {
        hopts.seed = seed;
        const auto rows = read_embeddings(thead_in);
        const AttributeHead head =
            train_head(embedding_vectors(rows), embedding_labels(rows), hopts);
        save_head(head, thead_out);
        log_line({{"event", "train-head"}, {"rows", rows.size()}, {"out", thead_out}});
    });

    // ---- manipulate ----
    auto* manip = app.add_subcommand("manipulate", "Attribute-guided motion editing");
    std::string manip_in, manip_chain, manip_model, manip_head, manip_out,
        manip_technique, manip_trace;
    double manip_grade = -1.0;
    LambdaMaxOptions lopts;
    int manip_grid = 101, manip_substeps = 50;
    manip->add_option("--in", manip_in, "Motion file")->required();
    manip->add_option("--chain", manip_chain, "Chain JSON")->required();
    manip->add_option("--model", manip_model, "Checkpoint")->required();
    manip->add_option("--head", manip_head, "Head file")->required();
    manip->add_option("--out", manip_out, "Output motion file")->required();
    manip->add_option("--target-technique", manip_technique, "Technique name");
    manip->add_option("--target-grade", manip_grade, "Grade in [0,1]");
    manip->add_option("--lambda-step", lopts.step)->capture_default_str();
    manip->add_option("--eps-conv", lopts.eps_conv)->capture_default_str();
    manip->add_option("--window", lopts.window)->capture_default_str();
    manip->add_option("--cap", lopts.cap)->capture_default_str();
    manip->add_option("--grid", manip_grid)->capture_default_str();
    manip->add_option("--substeps", manip_substeps)->capture_default_str();
    manip->add_option("--trace-out", manip_trace, "Score trace JSON path");
    manip->callback([&] {
        ManipulationTargets targets;
        if (!manip_technique.empty()) {
            targets.technique = technique_from_name(manip_technique);
        }
        if (manip_grade >= 0) targets.grade = manip_grade;
        const MotionSequence seq = load_seq(manip_in, 1.0, 0.0);
        const SkeletonChain chain = load_chain(manip_chain);
        const Checkpoint ckpt = load_checkpoint(manip_model);
        const AttributeHead head = load_head(manip_head);
        ManipulationResult details;
        const MotionSequence edited =
            manipulate_motion(seq, targets, chain, ckpt.model, head, manip_substeps,
                              manip_grid, lopts, &details);
        save_sequence(edited, manip_out, format_of(manip_out));
        if (!manip_trace.empty()) {
            json trace = json::array();
            for (const auto& p : details.trace) {
                trace.push_back(
                    {{"lambda", p.lambda},
                     {"score", p.score},
                     {"technique_probs",
                      std::vector<double>(p.technique_probs.data(),
                                          p.technique_probs.data() +
                                              p.technique_probs.size())},
                     {"grade", p.grade}});
            }
            std::ofstream out(manip_trace);
            if (!out) throw IoError("cannot write " + manip_trace);
            out << json{{"lambda_star", details.lambda_star}, {"trace", trace}}.dump(2)
                << '\n';
        }
        log_line({{"event", "manipulate"},
                  {"lambda_star", details.lambda_star},
                  {"out", manip_out}});
    });

    // ---- eval-separability ----
    auto* esep = app.add_subcommand("eval-separability",
                                    "Confusion matrix, UAR, grade MAE");
    std::string esep_emb, esep_head, esep_out;
    esep->add_option("--embeddings", esep_emb, "Embedding CSV")->required();
    esep->add_option("--head", esep_head, "Head file")->required();
    esep->add_option("--out", esep_out, "Metrics JSON path (also printed)");
    esep->callback([&] {
        const auto rows = read_embeddings(esep_emb);
        const AttributeHead head = load_head(esep_head);
        const SeparabilityReport rep = evaluate_separability(
            head, embedding_vectors(rows), embedding_labels(rows));
        json confusion = json::array();
        for (int r = 0; r < rep.confusion.rows(); ++r) {
            json row = json::array();
            for (int c = 0; c < rep.confusion.cols(); ++c) {
                row.push_back(rep.confusion(r, c));
            }
            confusion.push_back(row);
        }
        const json metrics = {{"confusion", confusion},
                              {"uar", rep.uar},
                              {"grade_mae", rep.grade_mae},
                              {"grade_mae_levels", rep.grade_mae_levels}};
        std::cout << metrics.dump(2) << '\n';
        if (!esep_out.empty()) {
            std::ofstream out(esep_out);
            if (!out) throw IoError("cannot write " + esep_out);
            out << metrics.dump(2) << '\n';
        }
    });

    // ---- eval-fid ----
    auto* efid = app.add_subcommand("eval-fid", "Frechet distance between two groups");
    std::string efid_a, efid_b;
    efid->add_option("--a", efid_a, "Embedding CSV, group A")->required();
    efid->add_option("--b", efid_b, "Embedding CSV, group B")->required();
    efid->callback([&] {
        const auto rows_a = read_embeddings(efid_a);
        const auto rows_b = read_embeddings(efid_b);
        Eigen::MatrixXd a(rows_a.size(), rows_a[0].z.size());
        Eigen::MatrixXd b(rows_b.size(), rows_b[0].z.size());
        for (std::size_t i = 0; i < rows_a.size(); ++i) {
            a.row(static_cast<Eigen::Index>(i)) = rows_a[i].z.transpose();
        }
        for (std::size_t i = 0; i < rows_b.size(); ++i) {
            b.row(static_cast<Eigen::Index>(i)) = rows_b[i].z.transpose();
        }
        const FidResult res = fid(a, b);
        if (res.ridged) {
            log_line({{"event", "warning"},
                      {"message", "small group: covariance ridged, FID unreliable"}});
        }
        std::cout << json{{"fid", res.fid}, {"ridged", res.ridged}}.dump(2) << '\n';
    });

    // ---- project ----
    auto* proj = app.add_subcommand("project", "2D principal-component export");
    std::string proj_emb, proj_out;
    proj->add_option("--embeddings", proj_emb, "Embedding CSV")->required();
    proj->add_option("--out", proj_out, "2D point CSV")->required();
    proj->callback([&] {
        const auto rows = read_embeddings(proj_emb);
        const Projection2d p = pca_project_2d(embedding_vectors(rows));
        std::ofstream out(proj_out);
        if (!out) throw IoError("cannot write " + proj_out);
        out.precision(17);
        out << "path,technique,grade_index,split,pc1,pc2\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out << rows[i].path << ',' << technique_name(rows[i].meta.technique) << ','
                << rows[i].meta.grade_index << ',' << split_name(rows[i].split) << ','
                << p.points(static_cast<Eigen::Index>(i), 0) << ','
                << p.points(static_cast<Eigen::Index>(i), 1) << '\n';
        }
        log_line({{"event", "project"},
                  {"rank", p.rank},
                  {"explained_variance_ratio",
                   {p.explained_variance_ratio(0), p.explained_variance_ratio(1)}}});
    });

    // ---- render ----
    auto* rend = app.add_subcommand("render", "Per-frame CSV + SVG export");
    std::string rend_in, rend_chain, rend_out = "render-out", rend_plane = "xz";
    RenderOptions ropts;
    rend->add_option("--in", rend_in, "Motion file")->required();
    rend->add_option("--chain", rend_chain, "Chain JSON")->required();
    rend->add_option("--out", rend_out, "Output directory")->capture_default_str();
    rend->add_option("--plane", rend_plane, "xz | yz | xy")->capture_default_str();
    rend->add_option("--stride", ropts.frame_stride, "Frame stride")
        ->capture_default_str();
    rend->callback([&] {
        if (rend_plane == "xz") ropts.plane = ViewPlane::XZ;
        else if (rend_plane == "yz") ropts.plane = ViewPlane::YZ;
        else if (rend_plane == "xy") ropts.plane = ViewPlane::XY;
        else throw Error("--plane must be xz, yz, or xy");
        const MotionSequence seq = load_seq(rend_in, 1.0, 0.0);
        const int n = render_sequence(seq, load_chain(rend_chain), rend_out, ropts);
        log_line({{"event", "render"}, {"svg_frames", n}, {"out", rend_out}});
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const mdae::Error& e) {
        std::cerr << json{{"error", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}}.dump() << '\n';
        return 1;
    }
}
