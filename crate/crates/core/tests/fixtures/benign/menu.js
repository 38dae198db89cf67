var menu = {
    items: [],
    add: function (label, href) {
        this.items.push({ label: label, href: href });
        return this;
    },
    render: function () {
        var out = [];
        for (var i = 0; i < this.items.length; i++) {
            var it = this.items[i];
            out.push('<a href="' + it.href + '">' + it.label + '</a>');
        }
        return out.join(" | ");
    }
};
menu.add("Home", "/").add("News", "/news").add("Help", "/help");
var ua = navigator.userAgent.toLowerCase();
if (ua.indexOf("msie") != -1) {
    document.write("<div class='ie'>" + menu.render() + "</div>");
} else {
    document.write("<div>" + menu.render() + "</div>");
}
setTimeout(function () { window.status = "ready"; }, 500);
