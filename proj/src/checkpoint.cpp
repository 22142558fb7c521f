#include "uavei/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace uavei {

namespace {

using nlohmann::json;

json net_to_json(const DenseNet& net) {
    json j;
    j["layerSizes"] = net.layer_sizes;
    j["outputActivation"] = net.out_act == OutputActivation::Tanh ? "tanh" : "identity";
    j["weights"] = net.weights;
    j["biases"] = net.biases;
    return j;
}

void net_from_json(const json& j, DenseNet& net, const std::string& name) {
    const auto sizes = j.at("layerSizes").get<std::vector<int>>();
    if (sizes != net.layer_sizes) {
        throw std::runtime_error("checkpoint: net '" + name +
                                 "' has incompatible layer sizes (config expects a different "
                                 "mission/agent geometry)");
    }
    const std::string act = j.at("outputActivation").get<std::string>();
    const std::string expect = net.out_act == OutputActivation::Tanh ? "tanh" : "identity";
    if (act != expect)
        throw std::runtime_error("checkpoint: net '" + name + "' activation mismatch");
    net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    for (std::size_t l = 0; l + 1 < static_cast<std::size_t>(net.layer_sizes.size()); ++l) {
        const std::size_t in = net.layer_sizes[l];
        const std::size_t out = net.layer_sizes[l + 1];
        if (net.weights.at(l).size() != in * out || net.biases.at(l).size() != out)
            throw std::runtime_error("checkpoint: net '" + name + "' parameter shape mismatch");
    }
}

json adam_to_json(const NetAdam& st) {
    json j;
    j["mw"] = st.mw;
    j["vw"] = st.vw;
    j["mb"] = st.mb;
    j["vb"] = st.vb;
    j["step"] = st.step;
    return j;
}

void adam_from_json(const json& j, NetAdam& st) {
    st.mw = j.at("mw").get<std::vector<std::vector<double>>>();
    st.vw = j.at("vw").get<std::vector<std::vector<double>>>();
    st.mb = j.at("mb").get<std::vector<std::vector<double>>>();
    st.vb = j.at("vb").get<std::vector<std::vector<double>>>();
    st.step = j.at("step").get<long>();
}

struct NetSlot {
    const char* name;
    DenseNet* online;
    DenseNet* target;
    NetAdam* adam;
};

std::vector<NetSlot> net_slots(Agent& a) {
    std::vector<NetSlot> slots;
    if (a.learned_inference()) {
        if (a.layout.mono) {
            slots.push_back({"mono", &a.mono, &a.t_mono, &a.ad_mono});
        } else {
            slots.push_back({"gating", &a.gating, &a.t_gating, &a.ad_gating});
            for (std::size_t k = 0; k < a.experts.size(); ++k)
                slots.push_back({nullptr, &a.experts[k], &a.t_experts[k], &a.ad_experts[k]});
        }
    }
    if (a.learned_heading()) slots.push_back({"uav", &a.uav, &a.t_uav, &a.ad_uav});
    if (a.trains()) slots.push_back({"critic", &a.critic, &a.t_critic, &a.ad_critic});
    return slots;
}

std::string slot_name(const NetSlot& s, std::size_t expert_counter) {
    return s.name ? s.name : "expert" + std::to_string(expert_counter);
}

} // namespace

void save_checkpoint(const std::string& path, const Agent& agent, int episodes_completed) {
    json j;
    j["schemaVersion"] = 1;
    j["policy"] = policy_name(agent.kind);
    j["obsDim"] = agent.obs_dim;
    j["gdCount"] = agent.layout.gd_count;
    j["repDim"] = agent.layout.rep_dim();
    j["episodesCompleted"] = episodes_completed;

    auto& a = const_cast<Agent&>(agent); // slots only read through const access below
    std::size_t expert_i = 0;
    json nets = json::object(), targets = json::object(), adams = json::object();
    for (const NetSlot& s : net_slots(a)) {
        const std::string name = slot_name(s, s.name ? expert_i : expert_i++);
        nets[name] = net_to_json(*s.online);
        targets[name] = net_to_json(*s.target);
        adams[name] = adam_to_json(*s.adam);
    }
    j["nets"] = std::move(nets);
    j["targets"] = std::move(targets);
    j["adam"] = std::move(adams);

    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f << j.dump(1, '\t') << '\n';
}

void load_checkpoint(const std::string& path, Agent& agent, int* episodes_completed) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    json j;
    f >> j;

    const std::string pol = j.at("policy").get<std::string>();
    if (pol != policy_name(agent.kind))
        throw std::runtime_error("checkpoint: policy '" + pol + "' does not match config '" +
                                 policy_name(agent.kind) + "'");
    if (j.at("obsDim").get<int>() != agent.obs_dim ||
        j.at("gdCount").get<int>() != agent.layout.gd_count ||
        j.at("repDim").get<int>() != agent.layout.rep_dim()) {
        throw std::runtime_error(
            "checkpoint: observation/action dimensions do not match the config "
            "(expected obsDim=" + std::to_string(agent.obs_dim) +
            ", gdCount=" + std::to_string(agent.layout.gd_count) +
            ", repDim=" + std::to_string(agent.layout.rep_dim()) + ")");
    }

    std::size_t expert_i = 0;
    for (const NetSlot& s : net_slots(agent)) {
        const std::string name = slot_name(s, s.name ? expert_i : expert_i++);
        net_from_json(j.at("nets").at(name), *s.online, name);
        net_from_json(j.at("targets").at(name), *s.target, name + " (target)");
        adam_from_json(j.at("adam").at(name), *s.adam);
    }
    if (episodes_completed) *episodes_completed = j.at("episodesCompleted").get<int>();
}

} // namespace uavei
