#include "ingram/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ingram/checkpoint.hpp"
#include "ingram/config.hpp"
#include "ingram/dataset_gen.hpp"
#include "ingram/errors.hpp"
#include "ingram/evaluation.hpp"
#include "ingram/inference.hpp"
#include "ingram/kg.hpp"
#include "ingram/relation_graph.hpp"
#include "ingram/training.hpp"

namespace ingram {

namespace {

namespace fs = std::filesystem;

std::string fmt(double x, const char* spec = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, x);
    return buf;
}

void require_data_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("data directory not found: " + dir.string());
    for (const char* name : {"train.txt", "msg.txt", "valid.txt", "test.txt"})
        if (!fs::is_regular_file(dir / name))
            throw Error("missing " + (dir / name).string());
}

struct InferenceData {
    KnowledgeGraph msg_graph;  // un-augmented
    std::vector<Triplet> valid;
    std::vector<Triplet> test;
    TripletFilter filter;  // msg + valid + test
    std::vector<char> is_known_relation;
};

InferenceData load_inference_side(const fs::path& dir, const KnowledgeGraph& g_tr) {
    InferenceData d;
    d.msg_graph = parse_triplets(dir / "msg.txt");
    d.valid = parse_targets(dir / "valid.txt", d.msg_graph);
    d.test = parse_targets(dir / "test.txt", d.msg_graph);
    const int m_orig = d.msg_graph.num_original_relations();
    d.filter.add_all(d.msg_graph.triplets(), m_orig);
    d.filter.add_all(d.valid, m_orig);
    d.filter.add_all(d.test, m_orig);
    d.is_known_relation.assign(size_t(m_orig), 0);
    for (int r = 0; r < m_orig; ++r)
        if (g_tr.relation_id(d.msg_graph.relation_label(r)) >= 0)
            d.is_known_relation[size_t(r)] = 1;
    return d;
}

int cmd_gen_data(const fs::path& raw_path, const GenConfig& cfg, const fs::path& out_dir) {
    if (!fs::is_regular_file(raw_path)) throw Error("raw triplet file not found: " + raw_path.string());
    const KnowledgeGraph raw = parse_triplets(raw_path);
    const GeneratedDataset ds = generate(raw, cfg);
    write_dataset(ds, cfg, out_dir);
    std::cout << "train: " << ds.train.size() << " triplets, " << ds.train_entities
              << " entities, " << ds.train_relations << " relations\n";
    std::cout << "inference: " << ds.msg.size() + ds.valid.size() + ds.test.size()
              << " triplets (" << ds.msg.size() << " msg / " << ds.valid.size() << " valid / "
              << ds.test.size() << " test), " << ds.inf_entities << " entities, "
              << ds.inf_relations << " relations\n";
    std::cout << "new-relation triplet fraction: " << fmt(ds.achieved_new_triplet_fraction)
              << "\n";
    for (const auto& w : ds.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

int cmd_train(const fs::path& data_dir, const fs::path& config_path, const fs::path& out_path,
              const std::string& log_path, std::optional<uint64_t> seed_override) {
    require_data_dir(data_dir);
    TrainConfig config = parse_train_config(config_path);
    if (seed_override) config.seed = *seed_override;

    const KnowledgeGraph g_tr = parse_triplets(data_dir / "train.txt");
    const InferenceData inf = load_inference_side(data_dir, g_tr);
    ValidationSet val;
    val.graph = inf.msg_graph;
    val.targets = inf.valid;
    val.filter = inf.filter;
    val.is_known_relation = inf.is_known_relation;

    const TrainResult result = fit(g_tr, config, &val);
    save_checkpoint(result.params, out_path);

    const std::string log_file = log_path.empty() ? out_path.string() + ".log" : log_path;
    std::ofstream log(log_file, std::ios::binary);
    if (!log) throw Error("cannot write training log: " + log_file);
    log << "epoch\tloss\tval_mrr\tval_hit10\n";
    for (const TrainLogEntry& e : result.log) {
        log << e.epoch << '\t' << fmt(e.loss) << '\t';
        if (std::isnan(e.val_mrr))
            log << "nan\tnan\n";
        else
            log << fmt(e.val_mrr) << '\t' << fmt(e.val_hit10) << '\n';
    }

    if (result.best_epoch >= 0)
        std::cout << "best checkpoint: epoch " << result.best_epoch << ", validation MRR "
                  << fmt(result.best_mrr) << "\n";
    else
        std::cout << "no validation point reached; kept final parameters\n";
    std::cout << "checkpoint written to " << out_path.string() << "\n";
    return 0;
}

void print_block(std::ostream& out, const char* slice, const MetricBlock& b) {
    out << "MR\t" << slice << '\t' << fmt(b.mr) << '\t' << b.n_queries << '\n';
    out << "MRR\t" << slice << '\t' << fmt(b.mrr) << '\t' << b.n_queries << '\n';
    out << "Hit@1\t" << slice << '\t' << fmt(b.hit1) << '\t' << b.n_queries << '\n';
    out << "Hit@3\t" << slice << '\t' << fmt(b.hit3) << '\t' << b.n_queries << '\n';
    out << "Hit@10\t" << slice << '\t' << fmt(b.hit10) << '\t' << b.n_queries << '\n';
}

int cmd_eval(const fs::path& data_dir, const fs::path& model_path, const std::string& split,
             bool unfiltered, std::optional<uint64_t> seed, const std::string& ranks_path) {
    require_data_dir(data_dir);
    const ModelParameters params = load_checkpoint(model_path);
    const KnowledgeGraph g_tr = parse_triplets(data_dir / "train.txt");
    const InferenceData inf = load_inference_side(data_dir, g_tr);
    const std::vector<Triplet>& targets = split == "valid" ? inf.valid : inf.test;

    const uint64_t s = seed ? *seed : inf.msg_graph.fingerprint();
    const EmbeddingSet emb = embed_graph(params, inf.msg_graph, s);
    const KnowledgeGraph g_aug = inf.msg_graph.augment_reverse();

    EvalOptions opts;
    opts.filtered = !unfiltered;
    opts.is_known_relation = inf.is_known_relation;
    const EvalReport report = evaluate(emb, params, g_aug, targets, inf.filter, opts);

    std::cout << "metric\tslice\tvalue\tn_queries\n";
    print_block(std::cout, "all", report.all);
    print_block(std::cout, "known_relations", report.known);
    print_block(std::cout, "new_relations", report.unseen);
    print_block(std::cout, "head_queries", report.head_dir);
    print_block(std::cout, "tail_queries", report.tail_dir);

    if (!ranks_path.empty()) {
        std::ofstream out(ranks_path, std::ios::binary);
        if (!out) throw Error("cannot write rank dump: " + ranks_path);
        out << "target_index\tdirection\trelation\trank\n";
        for (const QueryRank& r : report.ranks)
            out << r.target_index << '\t' << (r.head_direction ? "head" : "tail") << '\t'
                << g_aug.relation_label(targets[size_t(r.target_index)].rel) << '\t'
                << fmt(r.rank, "%.1f") << '\n';
    }
    return 0;
}

int cmd_embed(const fs::path& data_dir, const fs::path& model_path,
              std::optional<uint64_t> seed, const std::string& out_prefix) {
    require_data_dir(data_dir);
    const ModelParameters params = load_checkpoint(model_path);
    const KnowledgeGraph g_msg = parse_triplets(data_dir / "msg.txt");
    const uint64_t s = seed ? *seed : g_msg.fingerprint();
    const EmbeddingSet emb = embed_graph(params, g_msg, s);
    const KnowledgeGraph g_aug = g_msg.augment_reverse();

    auto dump = [](const std::string& path, const Tensor& t, auto label_of) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write embeddings: " + path);
        for (int r = 0; r < t.rows; ++r) {
            out << label_of(r);
            for (int c = 0; c < t.cols; ++c) out << '\t' << fmt(t.at(r, c), "%.17g");
            out << '\n';
        }
    };
    dump(out_prefix + ".relations.tsv", emb.relation_embeddings,
         [&g_aug](int r) { return g_aug.relation_label(r); });
    dump(out_prefix + ".entities.tsv", emb.entity_embeddings,
         [&g_aug](int r) { return g_aug.entity_label(r); });
    std::cout << "wrote " << out_prefix << ".relations.tsv and " << out_prefix
              << ".entities.tsv (seed " << s << ")\n";
    return 0;
}

int cmd_relgraph(const fs::path& triplet_file, int bins, const std::string& out_path,
                 const std::string& model_path, const std::string& cvalues_path) {
    std::optional<ModelParameters> params;
    if (!model_path.empty()) params = load_checkpoint(model_path);
    if (params && bins == 0) bins = params->hp.num_bins;
    if (bins == 0) bins = 10;

    const KnowledgeGraph g = parse_triplets(triplet_file).augment_reverse();
    const RelationGraph rg = build_relation_graph(g, bins);

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw Error("cannot write relation graph: " + out_path);
    out << "rel_i\trel_j\taffinity\tbin\n";
    for (const auto& e : rg.entries)
        out << g.relation_label(e.i) << '\t' << g.relation_label(e.j) << '\t'
            << fmt(e.affinity, "%.17g") << '\t' << e.bin << '\n';
    std::cout << "wrote " << out_path << " (" << rg.entries.size() << " nonzeros, " << bins
              << " bins)\n";

    if (!cvalues_path.empty()) {
        if (!params) throw Error("--c-values requires --model");
        std::ofstream cv(cvalues_path, std::ios::binary);
        if (!cv) throw Error("cannot write c values: " + cvalues_path);
        cv << "layer\thead\tbin\tc_value\n";
        for (size_t l = 0; l < params->rel_layers.size(); ++l)
            for (size_t h = 0; h < params->rel_layers[l].size(); ++h) {
                const Tensor& c = params->rel_layers[l][h].c;
                for (int b = 0; b < c.rows; ++b)
                    cv << l << '\t' << h << '\t' << (b + 1) << '\t'
                       << fmt(c.at(b, 0), "%.17g") << '\n';
            }
        std::cout << "wrote " << cvalues_path << "\n";
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"inductive knowledge graph embeddings via relation graphs"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "carve a raw corpus into train/inference graphs");
    std::string raw_path, gen_out;
    GenConfig gen_cfg;
    gen->add_option("--raw", raw_path, "raw triplet file")->required();
    gen->add_option("--n-tr", gen_cfg.n_tr, "seed entities for the training graph")->required();
    gen->add_option("--n-inf", gen_cfg.n_inf, "seed entities for the inference graph")->required();
    gen->add_option("--p-rel", gen_cfg.p_rel, "fraction of relations in the inference pool")
        ->required();
    gen->add_option("--p-tri", gen_cfg.p_tri, "target fraction of new-relation triplets")
        ->required();
    gen->add_option("--hop-cap", gen_cfg.hop_cap, "max neighbors per entity per hop");
    gen->add_option("--seed", gen_cfg.seed, "random seed");
    gen->add_option("--out", gen_out, "output dataset directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train on a dataset directory");
    std::string train_data, train_config, train_out, train_log;
    std::optional<uint64_t> train_seed;
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--config", train_config, "key = value config file")->required();
    train->add_option("--out", train_out, "checkpoint output path")->required();
    train->add_option("--log", train_log, "training log path (default <out>.log)");
    train->add_option("--seed", train_seed, "override the config seed");

    // eval
    auto* eval = app.add_subcommand("eval", "rank held-out triplets with a trained model");
    std::string eval_data, eval_model, eval_split = "test", eval_ranks;
    bool eval_unfiltered = false;
    std::optional<uint64_t> eval_seed;
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--model", eval_model, "checkpoint path")->required();
    eval->add_option("--split", eval_split, "test or valid")
        ->check(CLI::IsMember({"test", "valid"}));
    eval->add_flag("--unfiltered", eval_unfiltered, "raw ranking instead of filtered");
    eval->add_option("--seed", eval_seed, "inference feature seed (default: graph fingerprint)");
    eval->add_option("--ranks", eval_ranks, "per-query rank dump path");

    // embed
    auto* embed = app.add_subcommand("embed", "write embeddings for the message graph");
    std::string embed_data, embed_model, embed_out;
    std::optional<uint64_t> embed_seed;
    embed->add_option("--data", embed_data, "dataset directory")->required();
    embed->add_option("--model", embed_model, "checkpoint path")->required();
    embed->add_option("--seed", embed_seed, "inference feature seed (default: graph fingerprint)");
    embed->add_option("--out", embed_out, "output prefix")->required();

    // relgraph
    auto* relg = app.add_subcommand("relgraph", "export the relation graph as a TSV edge list");
    std::string relg_file, relg_out, relg_model, relg_cvalues;
    int relg_bins = 0;
    relg->add_option("--file", relg_file, "triplet file")->required();
    relg->add_option("--bins", relg_bins, "number of affinity bins (default 10 or the model's)");
    relg->add_option("--out", relg_out, "output TSV path")->required();
    relg->add_option("--model", relg_model, "checkpoint (for bins and c-value export)");
    relg->add_option("--c-values", relg_cvalues, "learned per-bin attention bias dump path");

    std::vector<char*> argv;
    std::vector<std::string> storage = args;
    argv.reserve(storage.size());
    for (auto& s : storage) argv.push_back(s.data());

    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(raw_path, gen_cfg, gen_out);
        if (train->parsed())
            return cmd_train(train_data, train_config, train_out, train_log, train_seed);
        if (eval->parsed())
            return cmd_eval(eval_data, eval_model, eval_split, eval_unfiltered, eval_seed,
                            eval_ranks);
        if (embed->parsed()) return cmd_embed(embed_data, embed_model, embed_seed, embed_out);
        if (relg->parsed())
            return cmd_relgraph(relg_file, relg_bins, relg_out, relg_model, relg_cvalues);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace ingram
