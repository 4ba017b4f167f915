#include "mandi/service.hpp"

#include <stdexcept>

#include <httplib.h>

namespace mandi {

struct HttpServer::Impl {
    explicit Impl(const Api& a) : api(a) {}
    const Api& api;
    httplib::Server server;
};

HttpServer::HttpServer(const Api& api) : impl_(std::make_unique<Impl>(api)) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        ApiRequest request;
        request.method = req.method;
        request.path = req.path;
        for (const auto& [k, v] : req.params) request.query[k] = v;
        request.authorization = req.get_header_value("Authorization");
        const auto response = impl_->api.handle(request);
        res.status = response.status;
        res.set_content(response.body, "application/json");
    };
    const std::string pattern = R"(/.*)";
    impl_->server.Get(pattern, handler);
    impl_->server.Post(pattern, handler);
    impl_->server.Put(pattern, handler);
    impl_->server.Delete(pattern, handler);
    impl_->server.Patch(pattern, handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw std::runtime_error("cannot bind " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace mandi
