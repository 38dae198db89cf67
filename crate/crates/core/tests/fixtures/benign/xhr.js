function createRequest() {
    try {
        return new XMLHttpRequest();
    } catch (e) {
        try {
            return new ActiveXObject("Msxml2.XMLHTTP");
        } catch (e2) {
            return new ActiveXObject("Microsoft.XMLHTTP");
        }
    }
}
var req = createRequest();
req.onreadystatechange = function () {
    if (req.readyState == 4 && req.status == 200) {
        var data = eval("(" + req.responseText + ")");
        document.getElementById("out").innerHTML = data.message;
    }
};
req.open("GET", "/api/status", true);
req.send(null);
