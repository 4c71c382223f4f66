package org.apache.hadoop.yarn.client;

/** Creates client-side proxies; not a server implementation. */
public class ClientRMProxy {
    public ClientRMBlockingStub createRMProxy(String address) {
        return null;
    }

    public SubmitApplicationResponse submitApplication(SubmitApplicationRequest request) {
        return null;
    }
}
