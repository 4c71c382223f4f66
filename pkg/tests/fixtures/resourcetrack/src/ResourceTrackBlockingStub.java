package org.apache.hadoop.yarn.server.api;

/** Client-side stub; forwards calls over the wire. */
public class ResourceTrackBlockingStub {
    public RegisterNodeResponse registerNode(RegisterNodeRequest request) {
        return null;
    }
}
